"""Monotonicity forms and their random / adversarial certification.

Surfaces U(x, mu) are tested with the displacement form (nonnegative when
monotone) and the Lasry-Lions form.  Hamiltonians are tested with the
displacement form including the Q correction, which must be nonpositive.
Sampling can only refute monotonicity or accumulate evidence for it; a
passing report is never a proof.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvexityFloorError
from .hamiltonian.base import HamiltonianModel, TerminalCostModel
from .hamiltonian.lagrangian import LagrangianModel
from .measures import DiscreteMeasure, TangentSample, sample_mixture

logger = logging.getLogger(__name__)

EVIDENCE_NOTE = ("random and adversarial sampling can refute monotonicity or accumulate "
                 "evidence for it, but cannot prove it")


# --------------------------------------------------------------------------
# feedback functions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeedbackFunction:
    """phi(x) = sum_k A_k tanh(<B_k, x> + c_k), clipped so |phi| <= C1, |dphi| <= C2."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    C1: float = 10.0
    C2: float = 10.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        B = np.array(self.B, dtype=float, ndmin=2)
        c = np.array(self.c, dtype=float).reshape(-1)
        s1 = np.sum(np.linalg.norm(A, axis=1))
        if s1 > self.C1:
            A *= self.C1 / s1
        s2 = np.sum(np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1))
        if s2 > self.C2:
            B *= self.C2 / s2
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.A.shape[1]

    @classmethod
    def zero(cls, dim: int = 1) -> FeedbackFunction:
        return cls(np.zeros((1, dim)), np.zeros((1, dim)), np.zeros(1))

    @classmethod
    def constant(cls, value, dim: int = 1) -> FeedbackFunction:
        # tanh(1e3) = 1 to machine precision
        v = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return cls(v[None, :], np.zeros((1, dim)), np.array([1e3]), C1=max(10.0, np.linalg.norm(v)))

    @classmethod
    def random(cls, rng: np.random.Generator, dim: int = 1, ridges: int = 8,
               C1: float = 10.0, C2: float = 10.0) -> FeedbackFunction:
        A = rng.normal(0.0, 1.0, size=(ridges, dim))
        B = rng.normal(0.0, 1.0, size=(ridges, dim))
        c = rng.normal(0.0, 1.0, size=ridges)
        return cls(A, B, c, C1, C2)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        return np.tanh(x @ self.B.T + self.c) @ self.A

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        s = 1.0 / np.cosh(x @ self.B.T + self.c) ** 2
        return np.einsum("nk,ka,kb->nab", s, self.A, self.B)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.B.ravel(), self.c])

    def from_vector(self, vec) -> FeedbackFunction:
        K, d = self.A.shape
        vec = np.asarray(vec, dtype=float)
        A = vec[: K * d].reshape(K, d)
        B = vec[K * d: 2 * K * d].reshape(K, d)
        return FeedbackFunction(A, B, vec[2 * K * d:], self.C1, self.C2)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "c": self.c.tolist(),
                "C1": self.C1, "C2": self.C2}


# --------------------------------------------------------------------------
# bilinear forms
# --------------------------------------------------------------------------


def _cross(tensor, s: TangentSample):
    """sum_ij w_i w_j <T[i, j] eta_j, eta_i> for T of shape (n, n, d, d)."""
    w, eta = s.weights, s.tangents
    return float(np.einsum("i,j,ia,ijab,jb->", w, w, eta, tensor, eta))


def _diag(tensor, s: TangentSample):
    """sum_i w_i <T[i] eta_i, eta_i> for T of shape (n, d, d)."""
    return float(np.einsum("i,ia,iab,ib->", s.weights, s.tangents, tensor, s.tangents))


def lasry_lions_form(surface: TerminalCostModel, s: TangentSample) -> float:
    mu = s.base
    return _cross(surface.dxmu(mu.atoms, mu, mu.atoms), s)


def displacement_form_surface(surface: TerminalCostModel, s: TangentSample) -> float:
    mu = s.base
    return lasry_lions_form(surface, s) + _diag(surface.dxx(mu.atoms, mu), s)


def lasry_lions_quotient(surface: TerminalCostModel, s: TangentSample, eps: float) -> float:
    """E[U(xi1, L1) + U(xi2, L2) - U(xi1, L2) - U(xi2, L1)] / eps^2 with xi2 = xi1 + eps eta."""
    mu1 = s.base
    x1 = mu1.atoms
    x2 = x1 + eps * s.tangents
    mu2 = mu1.with_atoms(x2)
    diff = (surface.value(x1, mu1) + surface.value(x2, mu2)
            - surface.value(x1, mu2) - surface.value(x2, mu1))
    return float(s.weights @ diff) / eps**2


def _inv_sqrt(mats, floor):
    vals, vecs = np.linalg.eigh(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    if np.any(vals < floor):
        raise ConvexityFloorError(
            f"convexity floor violated: eigenvalue {vals.min():.3g} < {floor:.3g}")
    return np.einsum("nab,nb,ncb->nac", vecs, vals**-0.5, vecs)


def hamiltonian_terms(h: HamiltonianModel, s: TangentSample, phi) -> dict:
    """The three pieces of the Hamiltonian displacement form."""
    mu = s.base
    x = mu.atoms
    p = phi(x) if callable(phi) else np.asarray(phi, dtype=float).reshape(x.shape)
    cross = _cross(h.dxmu(x, mu, x, p), s)
    diag = _diag(h.dxx(x, mu, p), s)
    dpmu = h.dpmu(x, mu, x, p)
    if np.any(dpmu):
        inner = np.einsum("j,ijab,jb->ia", s.weights, dpmu, s.tangents)
        root = _inv_sqrt(h.dpp(x, mu, p), 0.5 * h.c0)
        q = 0.25 * float(s.weights @ np.sum(np.einsum("iab,ib->ia", root, inner) ** 2, axis=1))
    else:
        # the floor still has to hold
        _inv_sqrt(h.dpp(x, mu, p), 0.5 * h.c0)
        q = 0.0
    return {"cross": cross, "diag": diag, "q": q}


def displacement_form_hamiltonian(h: HamiltonianModel, s: TangentSample, phi) -> float:
    t = hamiltonian_terms(h, s, phi)
    return t["cross"] + t["diag"] + t["q"]


def lagrangian_form(l: LagrangianModel, s: TangentSample, psi_values) -> tuple[float, float]:
    """(lhs, rhs) of the Lagrangian criterion; H is monotone iff lhs >= rhs."""
    mu = s.base
    x = mu.atoms
    a = np.asarray(psi_values, dtype=float).reshape(x.shape)
    lhs = _cross(l.dxmu(x, mu, x, a), s) + _diag(l.dxx(x, mu, a), s)
    inner = 0.5 * np.einsum("j,ijab,jb->ia", s.weights, l.damu(x, mu, x, a), s.tangents)
    inner += np.einsum("iba,ib->ia", l.dxa(x, mu, a), s.tangents)
    root = _inv_sqrt(l.daa(x, mu, a), 0.0)
    rhs = float(s.weights @ np.sum(np.einsum("iab,ib->ia", root, inner) ** 2, axis=1))
    return lhs, rhs


def optimal_dual_tangent(l: LagrangianModel, s: TangentSample, psi_values) -> np.ndarray:
    """The eta' that turns the sufficient-condition functional into lhs - rhs."""
    mu = s.base
    x = mu.atoms
    a = np.asarray(psi_values, dtype=float).reshape(x.shape)
    inner = 0.5 * np.einsum("j,ijab,jb->ia", s.weights, l.damu(x, mu, x, a), s.tangents)
    inner += np.einsum("iba,ib->ia", l.dxa(x, mu, a), s.tangents)
    return -np.linalg.solve(l.daa(x, mu, a), inner[..., None])[..., 0]


def joint_convexity_functional(l: LagrangianModel, s: TangentSample, psi_values, dual_tangents,
                               h: float = 1e-3) -> float:
    """d^2/(d eps d delta) of E L(xi + (eps+delta) eta, law(xi + eps eta), xi' + (eps+delta) eta')
    at zero, by a mixed central second difference."""
    mu = s.base
    x, eta = mu.atoms, s.tangents
    a = np.asarray(psi_values, dtype=float).reshape(x.shape)
    da = np.asarray(dual_tangents, dtype=float).reshape(x.shape)

    def F(e, dl):
        m = mu.with_atoms(x + e * eta)
        return float(mu.weights @ l.value(x + (e + dl) * eta, m, a + (e + dl) * da))

    return (F(h, h) - F(h, -h) - F(-h, h) + F(-h, -h)) / (4 * h * h)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    """min_value is the minimum of the sign-normalised form: the form itself for
    "≥0" forms, its negation for "≤0" forms.  verdict = pass iff min_value >= -tol.
    """

    form_name: str
    sign: str
    trials: int
    min_value: float
    tol: float
    witness: dict = field(default_factory=dict)
    note: str = EVIDENCE_NOTE

    @property
    def verdict(self) -> str:
        return "pass" if self.min_value >= -self.tol else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def extreme_value(self) -> float:
        """Most adverse raw form value (max for "≤0" forms, min for "≥0")."""
        return -self.min_value if self.sign == "<=0" else self.min_value

    def to_dict(self) -> dict:
        return {"form_name": self.form_name, "sign": self.sign, "trials": self.trials,
                "min_value": self.min_value, "extreme_value": self.extreme_value,
                "tol": self.tol, "verdict": self.verdict, "witness": self.witness,
                "note": self.note}


def default_tol(s: TangentSample) -> float:
    return 1e-8 * (1.0 + s.norm2())


def _witness(s: TangentSample, phi=None, value=None) -> dict:
    out = {"measure": s.base.to_dict(), "tangents": s.tangents.tolist()}
    if phi is not None:
        out["feedback"] = phi.to_dict()
    if value is not None:
        out["form_value"] = value
    return out


def _signed_form(model, s, phi):
    if isinstance(model, HamiltonianModel):
        return -displacement_form_hamiltonian(model, s, phi)
    return displacement_form_surface(model, s)


def _form_meta(model):
    if isinstance(model, HamiltonianModel):
        return "displacement_hamiltonian", "<=0"
    return "displacement_surface", ">=0"


def concentrated_witness(surface: TerminalCostModel, mu: DiscreteMeasure, weight: float = 1e-4):
    """Tangent supported on a light probe atom placed where dxx U is least convex.

    As the probe weight shrinks the normalised form tends to the smallest
    eigenvalue of dxx U there, so a surface that is not convex in x fails.
    """
    hess = surface.dxx(mu.atoms, mu)
    vals, vecs = np.linalg.eigh(0.5 * (hess + np.swapaxes(hess, 1, 2)))
    k = int(np.argmin(vals[:, 0]))
    point, direction = mu.atoms[k], vecs[k, :, 0]
    atoms = np.vstack([mu.atoms, point[None, :]])
    weights = np.concatenate([(1.0 - weight) * mu.weights, [weight]])
    base = DiscreteMeasure(atoms, weights)
    tangents = np.zeros_like(atoms)
    tangents[-1] = direction
    return TangentSample(base, tangents).normalized()


@dataclass
class SamplingConfig:
    min_atoms: int = 2
    max_atoms: int = 32
    spread: float = 3.0
    dim: int = 1
    C1: float = 10.0
    C2: float = 10.0
    ridges: int = 8


def _draw(rng, cfg: SamplingConfig):
    n = int(rng.integers(cfg.min_atoms, cfg.max_atoms + 1))
    mu = sample_mixture(rng, n, cfg.dim, cfg.spread)
    s = TangentSample(mu, rng.standard_normal((n, cfg.dim))).normalized()
    phi = FeedbackFunction.random(rng, cfg.dim, cfg.ridges, cfg.C1, cfg.C2)
    return s, phi


def _run_trials(model, seeds, cfg):
    best = None
    for child in seeds:
        rng = np.random.default_rng(child)
        s, phi = _draw(rng, cfg)
        val = _signed_form(model, s, phi)
        if best is None or val < best[0]:
            best = (val, s, phi)
        if not isinstance(model, HamiltonianModel):
            w = concentrated_witness(model, s.base)
            val = _signed_form(model, w, None)
            if val < best[0]:
                best = (val, w, None)
    return best


def certify(model, trials: int = 1000, seed: int = 0, tol: float | None = None,
            cfg: SamplingConfig | None = None, workers: int = 1) -> MonotonicityReport:
    """Random-sample certification of a Hamiltonian or a surface.

    Tangents are normalised to E|eta|^2 = 1, so the default tolerance is
    1e-8 * (1 + 1).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cfg = cfg or SamplingConfig(dim=model.dim)
    if tol is None:
        tol = 2e-8
    children = np.random.SeedSequence(seed).spawn(trials)
    if workers > 1:
        chunks = [children[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_trials, [model] * workers, chunks, [cfg] * workers))
        # order-independent reduction, ties broken by chunk index
        best = min((r for r in results if r is not None), key=lambda r: r[0])
    else:
        best = _run_trials(model, children, cfg)
    val, s, phi = best
    name, sign = _form_meta(model)
    raw = -val if sign == "<=0" else val
    report = MonotonicityReport(name, sign, trials, float(val), tol, _witness(s, phi, raw))
    logger.info("certify %s: min=%.3e verdict=%s", name, val, report.verdict)
    return report


# --------------------------------------------------------------------------
# adversarial search
# --------------------------------------------------------------------------


def search_violation(model, seed: int = 0, steps: int = 200, n_atoms: int = 8,
                     cfg: SamplingConfig | None = None, start_batch: int = 32,
                     lr: float = 0.05, fd_step: float = 1e-5,
                     tol: float | None = None) -> MonotonicityReport:
    """Projected gradient ascent on the violation (the negated signed form).

    Parameters are atom positions (kept in the sampling box), tangents
    (renormalised to E|eta|^2 = 1) and feedback coefficients (re-clipped).
    Gradients are central finite differences.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    cfg = cfg or SamplingConfig(dim=model.dim)
    cfg_fixed = SamplingConfig(n_atoms, n_atoms, cfg.spread, cfg.dim, cfg.C1, cfg.C2, cfg.ridges)
    rng = np.random.default_rng(seed)
    is_h = isinstance(model, HamiltonianModel)
    d = cfg.dim

    start = None
    for _ in range(start_batch):
        s, phi = _draw(rng, cfg_fixed)
        v = -_signed_form(model, s, phi)
        if start is None or v > start[0]:
            start = (v, s, phi)
    _, s0, phi0 = start
    weights = s0.weights
    n = weights.shape[0]
    box = cfg.spread + 2.0

    def unpack(z):
        atoms = np.clip(z[: n * d].reshape(n, d), -box, box)
        tang = z[n * d: 2 * n * d].reshape(n, d)
        s = TangentSample(DiscreteMeasure(atoms, weights), tang).normalized()
        phi = phi0.from_vector(z[2 * n * d:]) if is_h else None
        return s, phi

    def violation(z):
        s, phi = unpack(z)
        if not np.any(s.tangents):
            return -np.inf
        return -_signed_form(model, s, phi)

    def project(z):
        s, phi = unpack(z)
        parts = [s.atoms.ravel(), s.tangents.ravel()]
        if is_h:
            parts.append(phi.to_vector())
        return np.concatenate(parts)

    parts = [s0.atoms.ravel(), s0.tangents.ravel()]
    if is_h:
        parts.append(phi0.to_vector())
    z = project(np.concatenate(parts))
    fz = violation(z)
    best = (fz, z.copy())
    step = lr
    for _ in range(steps):
        g = np.empty_like(z)
        for i in range(z.size):
            e = np.zeros_like(z)
            e[i] = fd_step
            g[i] = (violation(z + e) - violation(z - e)) / (2 * fd_step)
        gn = np.linalg.norm(g)
        if not np.isfinite(gn) or gn == 0:
            break
        trial = project(z + step * g / gn)
        ft = violation(trial)
        if ft >= fz:
            z, fz = trial, ft
            step = min(step * 1.2, 1.0)
        else:
            step *= 0.5
        if fz > best[0]:
            best = (fz, z.copy())
    fbest, zbest = best
    s, phi = unpack(zbest)
    name, sign = _form_meta(model)
    if tol is None:
        tol = 2e-8
    raw = fbest if sign == "<=0" else -fbest
    return MonotonicityReport(name + "_search", sign, steps, float(-fbest), tol,
                              _witness(s, phi, float(raw)))
