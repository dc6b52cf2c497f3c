"""Exception types raised across the toolkit."""

from __future__ import annotations


class MFGError(Exception):
    """Base class for numerical failures in this package."""


class TransportCapError(MFGError):
    pass


class NewtonError(MFGError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConvexityFloorError(MFGError):
    pass


class ThresholdError(MFGError, ValueError):
    def __init__(self, message, minimal=None):
        super().__init__(message)
        self.minimal = minimal


class ConvergenceError(MFGError):
    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class SolverError(MFGError):
    pass


class RiccatiBlowUp(MFGError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class GridEscapeError(MFGError):
    def __init__(self, message, particle=None, time=None):
        super().__init__(message)
        self.particle = particle
        self.time = time


class WeightFloorError(MFGError, ValueError):
    """Atom weight too small for a 1/w scaled difference quotient."""
