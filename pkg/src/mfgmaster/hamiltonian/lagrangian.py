"""Legendre transform L(x, mu, a) = sup_p [-a.p - H(x, mu, p)] and Lagrangian models."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import NewtonError
from ..measures import DiscreteMeasure
from .base import HamiltonianModel, TerminalCostModel, eye_stack, points
from .lions import richardson_derivatives
from .models import QuadraticKinetic, SeparableHamiltonian

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100


def legendre_batch(h: HamiltonianModel, x, mu: DiscreteMeasure, a, tol: float = NEWTON_TOL,
                   max_iter: int = NEWTON_MAX_ITER):
    """Vectorised damped Newton on p -> -a.p - H(x, mu, p).

    Returns (values, maximisers).  Each row is iterated until the gradient
    norm is below ``tol``.
    """
    x = points(x, h.dim)
    a = np.broadcast_to(points(a, h.dim), x.shape)
    p = np.zeros_like(x)

    def objective(pp):
        return -np.sum(a * pp, axis=1) - h.value(x, mu, pp)

    phi = objective(p)
    for _ in range(max_iter):
        g = -a - h.dp(x, mu, p)
        active = np.linalg.norm(g, axis=1) > tol
        if not active.any():
            return phi, p
        step = np.linalg.solve(h.dpp(x, mu, p), g[..., None])[..., 0]
        step[~active] = 0.0
        t = np.ones(x.shape[0])
        for _ in range(40):
            trial = p + t[:, None] * step
            phi_t = objective(trial)
            worse = active & (phi_t < phi - 1e-13 * (1.0 + np.abs(phi)))
            if not worse.any():
                break
            t[worse] *= 0.5
        p, phi = trial, phi_t
    g = -a - h.dp(x, mu, p)
    if np.all(np.linalg.norm(g, axis=1) <= tol):
        return phi, p
    raise NewtonError(f"Legendre Newton did not converge in {max_iter} iterations", last_iterate=p)


def legendre_lagrangian(h: HamiltonianModel, x, mu: DiscreteMeasure, a) -> float:
    """L(x, mu, a) at a single point."""
    if h.c0 <= 0:
        raise ValueError("Legendre transform needs a uniformly convex Hamiltonian (c0 > 0)")
    vals, _ = legendre_batch(h, np.atleast_1d(x)[None, :], mu, np.atleast_1d(a)[None, :])
    return float(vals[0])


def lagrangian_hat(h: HamiltonianModel, x, mu, p) -> np.ndarray:
    """p.dp H - H, equal to L(x, mu, -dp H(x, mu, p))."""
    return np.sum(np.asarray(p) * h.dp(x, mu, p), axis=1) - h.value(x, mu, p)


def optimal_control(h: HamiltonianModel, x, mu, p) -> np.ndarray:
    """a* = -dp H(x, mu, p)."""
    return -h.dp(x, mu, p)


class LagrangianModel:
    """L(x, mu, a) with derivatives; same array conventions as the Hamiltonians."""

    dim = 1

    def value(self, x, mu, a):
        raise NotImplementedError

    def dx(self, x, mu, a):
        raise NotImplementedError

    def da(self, x, mu, a):
        raise NotImplementedError

    def dxx(self, x, mu, a):
        raise NotImplementedError

    def dxa(self, x, mu, a):
        raise NotImplementedError

    def daa(self, x, mu, a):
        raise NotImplementedError

    def dmu(self, x, mu, xt, a):
        raise NotImplementedError

    def dxmu(self, x, mu, xt, a):
        raise NotImplementedError

    def damu(self, x, mu, xt, a):
        raise NotImplementedError


class SeparableLagrangian(LagrangianModel):
    """L = |a|^2 / (2 s) + F(x, mu), the transform of (s/2)|p|^2 - F."""

    def __init__(self, coupling: TerminalCostModel, scale: float = 1.0):
        self.F = coupling
        self.s = float(scale)
        self.dim = coupling.dim

    def value(self, x, mu, a):
        a = points(a, self.dim)
        return np.sum(a**2, axis=1) / (2 * self.s) + self.F.value(x, mu)

    def dx(self, x, mu, a):
        return self.F.dx(x, mu)

    def da(self, x, mu, a):
        return points(a, self.dim) / self.s

    def dxx(self, x, mu, a):
        return self.F.dxx(x, mu)

    def dxa(self, x, mu, a):
        return np.zeros((points(x, self.dim).shape[0], self.dim, self.dim))

    def daa(self, x, mu, a):
        return eye_stack(points(x, self.dim).shape[0], self.dim, 1.0 / self.s)

    def dmu(self, x, mu, xt, a):
        return self.F.dmu(x, mu, xt)

    def dxmu(self, x, mu, xt, a):
        return self.F.dxmu(x, mu, xt)

    def damu(self, x, mu, xt, a):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.zeros((n, m, self.dim, self.dim))


class LegendreLagrangian(LagrangianModel):
    """Numerical transform of any uniformly convex H.

    Values come from :func:`legendre_batch`; derivatives from Richardson
    central differences of those values in (x, a, atom positions), so they
    do not rely on any duality identity.  Lions derivatives are available at
    the atoms of ``mu`` only.
    """

    def __init__(self, h: HamiltonianModel, step: float = 5e-3):
        if h.c0 <= 0:
            raise ValueError("Legendre transform needs c0 > 0")
        self.h = h
        self.dim = h.dim
        self.step = float(step)

    def value(self, x, mu, a):
        vals, _ = legendre_batch(self.h, x, mu, a)
        return vals

    def _batch(self, mu, z):
        d, n_atoms = self.dim, mu.size
        x, a, atoms = z[:, :d], z[:, d:2 * d], z[:, 2 * d:].reshape(-1, n_atoms, d)
        out = np.empty(z.shape[0])
        keys = {}
        for row in range(z.shape[0]):
            keys.setdefault(atoms[row].tobytes(), []).append(row)
        for rows in keys.values():
            rows = np.asarray(rows)
            m = mu.with_atoms(atoms[rows[0]])
            out[rows] = legendre_batch(self.h, x[rows], m, a[rows])[0]
        return out

    def derivatives(self, x, mu, a) -> dict:
        """All derivatives at one point (x, a); Lions parts indexed by atom."""
        d = self.dim
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a = np.atleast_1d(np.asarray(a, dtype=float))
        z0 = np.concatenate([x, a, mu.atoms.ravel()])
        D = z0.shape[0]
        head = range(2 * d)
        pairs = [(i, j) for i in head for j in range(i, D)]
        grad, hess = richardson_derivatives(lambda z: self._batch(mu, z), z0, self.step,
                                            pairs=pairs, grad_index=range(D))
        xs, as_ = slice(0, d), slice(d, 2 * d)
        w = mu.weights
        atom_grad = grad[2 * d:].reshape(mu.size, d) / w[:, None]
        cross = hess[:2 * d, 2 * d:].reshape(2 * d, mu.size, d) / w[None, :, None]
        return {
            "value": float(self._batch(mu, z0[None, :])[0]),
            "dx": grad[xs], "da": grad[as_],
            "dxx": hess[xs, xs], "dxa": hess[xs, as_], "daa": hess[as_, as_],
            "dmu": atom_grad,                                  # (m, d)
            "dxmu": np.transpose(cross[:d], (1, 0, 2)),        # (m, d, d)
            "damu": np.transpose(cross[d:], (1, 0, 2)),
        }

    # the generic interface loops over points
    def _stack(self, key, x, mu, a):
        x = points(x, self.dim)
        a = np.broadcast_to(points(a, self.dim), x.shape)
        return np.stack([self.derivatives(xi, mu, ai)[key] for xi, ai in zip(x, a)])

    def dx(self, x, mu, a):
        return self._stack("dx", x, mu, a)

    def da(self, x, mu, a):
        return self._stack("da", x, mu, a)

    def dxx(self, x, mu, a):
        return self._stack("dxx", x, mu, a)

    def dxa(self, x, mu, a):
        return self._stack("dxa", x, mu, a)

    def daa(self, x, mu, a):
        return self._stack("daa", x, mu, a)

    def _atom_index(self, mu, xt):
        xt = points(xt, self.dim)
        idx = []
        for row in xt:
            hit = np.flatnonzero(np.all(mu.atoms == row, axis=1))
            if hit.size == 0:
                raise ValueError("numerical Lions derivatives exist only at atoms of mu")
            idx.append(hit[0])
        return np.asarray(idx)

    def dmu(self, x, mu, xt, a):
        return self._stack("dmu", x, mu, a)[:, self._atom_index(mu, xt)]

    def dxmu(self, x, mu, xt, a):
        return self._stack("dxmu", x, mu, a)[:, self._atom_index(mu, xt)]

    def damu(self, x, mu, xt, a):
        return self._stack("damu", x, mu, a)[:, self._atom_index(mu, xt)]


def lagrangian_of(h: HamiltonianModel) -> LagrangianModel:
    """Closed form for (s/2)|p|^2 - F, numerical transform otherwise."""
    if isinstance(h, SeparableHamiltonian) and isinstance(h.kinetic, QuadraticKinetic):
        return SeparableLagrangian(h.coupling, h.kinetic.scale)
    return LegendreLagrangian(h)


def identity_residuals(h: HamiltonianModel, l: LagrangianModel, x, mu: DiscreteMeasure,
                       p) -> dict:
    """Gaps in the first- and second-order duality relations between H and L
    at one point (x, p), with a* = -d_p H.  Each entry is (residual, reference
    magnitude); Lions parts are taken at the atoms of mu."""
    d = h.dim
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, d)
    p = np.atleast_1d(np.asarray(p, dtype=float)).reshape(1, d)
    a = -h.dp(x, mu, p)
    xt = mu.atoms
    if isinstance(l, LegendreLagrangian):
        D = l.derivatives(x[0], mu, a[0])
    else:
        D = {"dx": l.dx(x, mu, a)[0], "dxx": l.dxx(x, mu, a)[0], "dxa": l.dxa(x, mu, a)[0],
             "daa": l.daa(x, mu, a)[0], "dmu": l.dmu(x, mu, xt, a)[0],
             "dxmu": l.dxmu(x, mu, xt, a)[0], "damu": l.damu(x, mu, xt, a)[0]}
    inv = np.linalg.inv(D["daa"])
    xa = D["dxa"]
    ref = {
        "dx": h.dx(x, mu, p)[0],
        "dmu": h.dmu(x, mu, xt, p)[0],
        "dpp": h.dpp(x, mu, p)[0],
        "dxp": h.dxp(x, mu, p)[0],
        "dxx": h.dxx(x, mu, p)[0],
        "dxmu": h.dxmu(x, mu, xt, p)[0],
        "dpmu": h.dpmu(x, mu, xt, p)[0],
    }
    dual = {
        "dx": -D["dx"],
        "dmu": -D["dmu"],
        "dpp": inv,
        "dxp": xa @ inv,
        "dxx": -D["dxx"] + xa @ inv @ xa.T,
        "dxmu": -D["dxmu"] + np.einsum("ab,bc,mcd->mad", xa, inv, D["damu"]),
        "dpmu": np.einsum("ab,mbc->mac", inv, D["damu"]),
    }
    return {k: (float(np.max(np.abs(ref[k] - dual[k]))), float(np.max(np.abs(ref[k]))))
            for k in ref}
