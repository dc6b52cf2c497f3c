"""Array conventions shared by every model.

Points are passed as ``(n, d)`` arrays (a 1-d array is read as n points on
the line).  Returned shapes:

    value           (n,)
    gradient        (n, d)
    Hessian block   (n, d, d)      [k, i, j] = d_i d_j
    Lions           (n, m, d)      evaluated at x[k] and x_tilde[l]
    mixed Lions     (n, m, d, d)   [k, l, i, j] = d_{x_i} (d_mu)_j
"""

from __future__ import annotations

import numpy as np


def points(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, dim) if (dim > 1 and arr.shape[0] == dim) else arr[:, None]
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points in R^{dim}, got shape {arr.shape}")
    return arr


def eye_stack(n: int, d: int, scale=1.0) -> np.ndarray:
    out = np.zeros((n, d, d))
    idx = np.arange(d)
    out[:, idx, idx] = np.reshape(np.asarray(scale, dtype=float), (-1, 1))
    return out


class TerminalCostModel:
    """A function U(x, mu) together with its x- and Lions derivatives.

    Used for terminal costs G, for the coupling F of separable Hamiltonians
    and as the generic "surface" whose monotonicity is certified.
    """

    dim = 1
    depends_on_measure = True
    # bounds on |dx G|, |dxx G| / |d_mu G|, |dxmu G| / W_2-Lipschitz constant
    L0 = np.inf
    L1 = np.inf
    L2 = np.inf

    def value(self, x, mu):
        raise NotImplementedError

    def dx(self, x, mu):
        raise NotImplementedError

    def dxx(self, x, mu):
        raise NotImplementedError

    def dmu(self, x, mu, xt):
        raise NotImplementedError

    def dxmu(self, x, mu, xt):
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class HamiltonianModel:
    """H(x, mu, p) with x, p and Lions derivatives.

    ``c0`` is the uniform convexity floor in p, ``C0`` the constant in
    ``|dx H| <= C0 (1 + |p|)``.
    """

    dim = 1
    depends_on_measure = True
    c0 = 0.0
    C0 = np.inf
    # third-order bounds are carried as metadata only
    third_order_bounded = True

    def lipschitz_envelope(self, R: float) -> float:
        return np.inf

    def value(self, x, mu, p):
        raise NotImplementedError

    def dx(self, x, mu, p):
        raise NotImplementedError

    def dp(self, x, mu, p):
        raise NotImplementedError

    def dxx(self, x, mu, p):
        raise NotImplementedError

    def dxp(self, x, mu, p):
        raise NotImplementedError

    def dpp(self, x, mu, p):
        raise NotImplementedError

    def dmu(self, x, mu, xt, p):
        raise NotImplementedError

    def dxmu(self, x, mu, xt, p):
        raise NotImplementedError

    def dpmu(self, x, mu, xt, p):
        raise NotImplementedError

    def params(self) -> dict:
        return {}
