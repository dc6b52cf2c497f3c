"""Discrete probability measures on R^d and Wasserstein distances between them.

Every measure in the package is a finite weighted cloud of atoms.  The 1-d
path uses the monotone (quantile) coupling; in higher dimension equal-weight
clouds go through an assignment solver and everything else through a small
transport linear program.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .errors import TransportCapError

WEIGHT_TOL = 1e-12
EXACT_CAP = 64


def _as_atoms(atoms) -> np.ndarray:
    arr = np.asarray(atoms, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("atoms must be a list of points in R^d")
    return arr


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted atom cloud ``sum_i w_i delta_{x_i}``.

    Zero-weight atoms are dropped on construction.  Coincident atoms are
    kept as separate entries.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_atoms(self.atoms)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != atoms.shape[0]:
            raise ValueError("atoms and weights differ in length")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        keep = weights > 0
        atoms, weights = atoms[keep], weights[keep]
        if atoms.shape[0] == 0:
            raise ValueError("measure has no atoms with positive weight")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum():.16g}, not 1")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        atoms = np.ascontiguousarray(atoms)
        weights = np.ascontiguousarray(weights)
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms) -> DiscreteMeasure:
        atoms = _as_atoms(atoms)
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> DiscreteMeasure:
        return cls(np.atleast_1d(np.asarray(point, dtype=float))[None, :], [1.0])

    @classmethod
    def from_density(cls, nodes, masses) -> DiscreteMeasure:
        """Grid bridge: cell centres become atoms carrying the cell masses."""
        masses = np.clip(np.asarray(masses, dtype=float), 0.0, None)
        return cls(nodes, masses / masses.sum())

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def __len__(self):
        return self.size

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def second_moment(self) -> float:
        """M_2(mu)^2 = sum_i w_i |x_i|^2."""
        return float(self.weights @ np.sum(self.atoms**2, axis=1))

    def expect(self, values) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values, dtype=float), axes=(0, 0))

    def with_atoms(self, atoms) -> DiscreteMeasure:
        return DiscreteMeasure(atoms, self.weights)

    def isclose(self, other: DiscreteMeasure, tol: float = 1e-12) -> bool:
        if self.dim != other.dim or self.size != other.size:
            return False
        a = self._sorted_table()
        b = other._sorted_table()
        return bool(np.all(np.abs(a - b) <= tol))

    def _sorted_table(self):
        table = np.column_stack([self.atoms, self.weights])
        order = np.lexsort(table.T[::-1])
        return table[order]

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return self.isclose(other)

    __hash__ = None

    def to_dict(self) -> dict:
        return {"dim": self.dim, "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> DiscreteMeasure:
        atoms = np.asarray(data["atoms"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(atoms, data["weights"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> DiscreteMeasure:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class TangentSample:
    """The law of a pair (xi, eta) with eta = v(xi): one tangent per atom."""

    base: DiscreteMeasure
    tangents: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tangents, dtype=float)
        if t.ndim == 1:
            t = t[:, None]
        if t.shape != self.base.atoms.shape:
            raise ValueError(
                f"tangents shape {t.shape} does not match atoms {self.base.atoms.shape}"
            )
        t = np.ascontiguousarray(t)
        t.setflags(write=False)
        object.__setattr__(self, "tangents", t)

    @property
    def atoms(self):
        return self.base.atoms

    @property
    def weights(self):
        return self.base.weights

    def norm2(self) -> float:
        """E|eta|^2."""
        return float(self.weights @ np.sum(self.tangents**2, axis=1))

    def normalized(self) -> TangentSample:
        n = np.sqrt(self.norm2())
        if n == 0:
            return self
        return TangentSample(self.base, self.tangents / n)

    def with_tangents(self, tangents) -> TangentSample:
        return TangentSample(self.base, tangents)

    def to_dict(self) -> dict:
        return {"measure": self.base.to_dict(), "tangents": self.tangents.tolist()}


def _check_dims(mu, nu):
    if mu.dim != nu.dim:
        raise ValueError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def _quantile_cost(mu, nu, p):
    # monotone coupling between two weighted clouds on the line
    ia = np.argsort(mu.atoms[:, 0], kind="stable")
    ib = np.argsort(nu.atoms[:, 0], kind="stable")
    xa, wa = mu.atoms[ia, 0], mu.weights[ia]
    xb, wb = nu.atoms[ib, 0], nu.weights[ib]
    ca = np.cumsum(wa)
    cb = np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    breaks = np.union1d(ca, cb)
    lengths = np.diff(np.concatenate([[0.0], breaks]))
    mids = breaks - 0.5 * lengths
    ja = np.minimum(np.searchsorted(ca, mids), len(xa) - 1)
    jb = np.minimum(np.searchsorted(cb, mids), len(xb) - 1)
    return float(np.sum(lengths * np.abs(xa[ja] - xb[jb]) ** p))


def _equal_uniform(mu, nu):
    n = mu.size
    return (
        n == nu.size
        and np.allclose(mu.weights, 1.0 / n, atol=1e-15)
        and np.allclose(nu.weights, 1.0 / n, atol=1e-15)
    )


def _transport_cost(mu, nu, p):
    cost = np.linalg.norm(mu.atoms[:, None, :] - nu.atoms[None, :, :], axis=2) ** p
    if _equal_uniform(mu, nu) and mu.size <= EXACT_CAP:
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].sum() / mu.size)
    if max(mu.size, nu.size) > EXACT_CAP and not _equal_uniform(mu, nu):
        raise TransportCapError("exact transport cap exceeded")
    n, m = cost.shape
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(cost.ravel(), A_eq=a_eq[:-1], b_eq=b_eq[:-1], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def wasserstein(mu: DiscreteMeasure, nu: DiscreteMeasure, p: int = 2) -> float:
    _check_dims(mu, nu)
    if mu.dim == 1:
        cost = _quantile_cost(mu, nu, p)
    else:
        cost = _transport_cost(mu, nu, p)
    return max(cost, 0.0) ** (1.0 / p)


def w2_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return wasserstein(mu, nu, 2)


def w1_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """W_1; on the line this is the integral of |F_mu - F_nu|."""
    _check_dims(mu, nu)
    if mu.dim != 1:
        return wasserstein(mu, nu, 1)
    xs = np.concatenate([mu.atoms[:, 0], nu.atoms[:, 0]])
    ws = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(xs, kind="stable")
    xs, ws = xs[order], ws[order]
    gap = np.cumsum(ws)[:-1]
    return float(np.sum(np.abs(gap) * np.diff(xs)))


def perturb_atom(mu: DiscreteMeasure, k: int, shift) -> DiscreteMeasure:
    if not 0 <= k < mu.size:
        raise IndexError(f"atom index {k} out of range for {mu.size} atoms")
    atoms = np.array(mu.atoms)
    atoms[k] += np.broadcast_to(np.asarray(shift, dtype=float), (mu.dim,))
    return DiscreteMeasure(atoms, mu.weights)


def shift_atoms(mu: DiscreteMeasure, shifts) -> DiscreteMeasure:
    return DiscreteMeasure(mu.atoms + np.asarray(shifts, dtype=float).reshape(mu.atoms.shape), mu.weights)


def sample_gaussian(n: int, mean=0.0, sd: float = 1.0, seed=None) -> DiscreteMeasure:
    """n uniform-weight atoms drawn from N(mean, sd^2 I)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if sd < 0:
        raise ValueError("sd must be >= 0")
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    rng = np.random.default_rng(seed)
    atoms = mean + sd * rng.standard_normal((n, mean.shape[0]))
    return DiscreteMeasure.uniform(atoms)


def sample_mixture(rng: np.random.Generator, n: int, dim: int = 1, spread: float = 2.0,
                   components: int | None = None) -> DiscreteMeasure:
    """Random Gaussian-mixture cloud with n uniform atoms."""
    k = components or int(rng.integers(1, 4))
    centers = rng.uniform(-spread, spread, size=(k, dim))
    sds = rng.uniform(0.05, 1.0, size=k)
    labels = rng.integers(0, k, size=n)
    atoms = centers[labels] + sds[labels, None] * rng.standard_normal((n, dim))
    return DiscreteMeasure.uniform(atoms)
