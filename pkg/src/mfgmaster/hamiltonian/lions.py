"""Finite-difference oracles: Lions derivatives and Richardson stencils."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import WeightFloorError
from ..measures import DiscreteMeasure, perturb_atom

MIN_WEIGHT = 1e-12


def fd_lions_derivative(U: Callable[[DiscreteMeasure], float], mu: DiscreteMeasure, k: int,
                        eps: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Numerical d_mu U(mu, x_k) from symmetric shifts of atom k, scaled by 1/w_k."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    wk = float(mu.weights[k])
    if wk < MIN_WEIGHT:
        raise WeightFloorError(f"atom {k} has weight {wk:.3g} below {MIN_WEIGHT:g}")
    d = mu.dim

    def quotient(step):
        out = np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = step
            out[j] = (U(perturb_atom(mu, k, e)) - U(perturb_atom(mu, k, -e))) / (2 * step * wk)
        return out

    coarse = quotient(eps)
    if not richardson:
        return coarse
    return (4.0 * quotient(0.5 * eps) - coarse) / 3.0


def richardson_derivatives(f_batch: Callable[[np.ndarray], np.ndarray], z0, h: float,
                           pairs=None, grad_index=None):
    """Gradient and selected Hessian entries of f at z0 by Richardson-extrapolated
    central differences (steps h and h/2).

    ``f_batch`` maps an (N, D) array of points to N values; all stencil points
    are evaluated in a single call.  ``pairs`` lists the (i, j) Hessian entries
    wanted (default: all).  Returns (grad, hess) with unrequested entries NaN.
    """
    z0 = np.asarray(z0, dtype=float)
    D = z0.shape[0]
    if grad_index is None:
        grad_index = range(D)
    if pairs is None:
        pairs = [(i, j) for i in range(D) for j in range(i, D)]
    pts = [z0]
    plan = []  # (kind, i, j, step, start)

    def add(offsets):
        start = len(pts)
        for off in offsets:
            pts.append(z0 + off)
        return start

    eye = np.eye(D)
    for s in (h, 0.5 * h):
        for i in grad_index:
            plan.append(("g", i, i, s, add([s * eye[i], -s * eye[i]])))
        for i, j in pairs:
            if i == j:
                plan.append(("d", i, i, s, add([s * eye[i], -s * eye[i]])))
            else:
                ei, ej = s * eye[i], s * eye[j]
                plan.append(("m", i, j, s, add([ei + ej, ei - ej, -ei + ej, -ei - ej])))
    vals = np.asarray(f_batch(np.array(pts)), dtype=float)
    f0 = vals[0]
    grad = np.full(D, np.nan)
    hess = np.full((D, D), np.nan)
    raw = {}
    for kind, i, j, s, st in plan:
        if kind == "g":
            q = (vals[st] - vals[st + 1]) / (2 * s)
        elif kind == "d":
            q = (vals[st] - 2 * f0 + vals[st + 1]) / s**2
        else:
            q = (vals[st] - vals[st + 1] - vals[st + 2] + vals[st + 3]) / (4 * s * s)
        raw[(kind, i, j, s)] = q
    for (kind, i, j, s), q in raw.items():
        if s != h:
            continue
        fine = raw[(kind, i, j, 0.5 * h)]
        est = (4.0 * fine - q) / 3.0
        if kind == "g":
            grad[i] = est
        else:
            hess[i, j] = hess[j, i] = est
    return grad, hess
