"""Numerical toolkit for mean field game master equations with non-separable
Hamiltonians: monotonicity certification, a 1-d mean field PDE solver, the
master value surface and its measure derivatives, and propagation checks."""

from .errors import (ConvergenceError, ConvexityFloorError, GridEscapeError, MFGError,
                     NewtonError, RiccatiBlowUp, SolverError, ThresholdError,
                     TransportCapError, WeightFloorError)
from .measures import (DiscreteMeasure, TangentSample, perturb_atom, sample_gaussian,
                       w1_distance, w2_distance)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "ConvexityFloorError", "GridEscapeError", "MFGError", "NewtonError",
    "RiccatiBlowUp", "SolverError", "ThresholdError", "TransportCapError", "WeightFloorError",
    "DiscreteMeasure", "TangentSample", "perturb_atom", "sample_gaussian", "w1_distance",
    "w2_distance",
]
