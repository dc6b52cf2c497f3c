"""Pointwise evaluation of the master field V(t, x, mu) by re-solving the
mean field system, and its measure derivatives by atom perturbation.

Every solve for a given configuration uses one fixed spatial grid and time
step, restricted to the horizon [t0, T], so interpolation bias cancels in
differences.  Perturbed solves are warm-started from the base flow.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import WeightFloorError
from .measures import DiscreteMeasure, shift_atoms, wasserstein
from .mfg_solver import Grid1D, MfgSolution, solve_mfg

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-6


@dataclass(frozen=True)
class MasterEvalConfig:
    """Solver settings shared by every re-solve of the master field.

    ``eps`` is the atom displacement used in the measure difference
    quotients; ``None`` means a quarter of the cell width.
    """

    grid: Grid1D
    damping: float = 0.8
    tol: float = 1e-10
    max_iter: int = 300
    eps: float | None = None
    richardson: bool = True
    workers: int = 1
    drift_bound: float = 0.0

    def __post_init__(self):
        if self.eps is not None and not 0 < self.eps <= 0.5 * self.grid.dx:
            raise ValueError(f"eps must lie in (0, {0.5 * self.grid.dx:.4g}] (half a cell)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def step(self) -> float:
        return 0.25 * self.grid.dx if self.eps is None else float(self.eps)

    @classmethod
    def around(cls, mu: DiscreteMeasure, T: float, nx: int = 120, nt: int = 50,
               t0: float = 0.0, margin: float = 0.0, **kwargs) -> MasterEvalConfig:
        grid = Grid1D.around(mu, t0, T, nx, nt, kwargs.get("drift_bound", 0.0), margin)
        return cls(grid, **kwargs)

    def with_workers(self, workers: int) -> MasterEvalConfig:
        return replace(self, workers=workers)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "damping": self.damping, "tol": self.tol,
                "max_iter": self.max_iter, "eps": self.step, "richardson": self.richardson,
                "workers": self.workers}


@dataclass
class LipschitzReport:
    metric: str
    trials: int
    max_ratio: float
    ratio_at_shrinking_steps: list
    max_ratio_dx: float
    dx_ratio_at_shrinking_steps: list
    scales: list
    witness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_ratio < 0:
            raise ValueError("max_ratio must be >= 0")

    def to_dict(self) -> dict:
        return {"metric": self.metric, "trials": self.trials, "max_ratio": self.max_ratio,
                "ratio_at_shrinking_steps": list(self.ratio_at_shrinking_steps),
                "max_ratio_dx": self.max_ratio_dx,
                "dx_ratio_at_shrinking_steps": list(self.dx_ratio_at_shrinking_steps),
                "scales": list(self.scales), "witness": self.witness}


# --------------------------------------------------------------------------
# solves
# --------------------------------------------------------------------------


def master_solve(h, g, mu: DiscreteMeasure, t0: float, cfg: MasterEvalConfig,
                 initial_flow=None) -> MfgSolution:
    """Equilibrium from (t0, mu) on the configured grid restricted to [t0, T]."""
    grid = cfg.grid.sub(t0)
    return solve_mfg(h, g, mu, grid, damping=cfg.damping, tol=cfg.tol, max_iter=cfg.max_iter,
                     initial_flow=initial_flow, check_grid=False)


def _initial_row(args):
    h, g, mu, t0, cfg, flow = args
    return master_solve(h, g, mu, t0, cfg, flow).u[0]


def _rows(h, g, measures, t0, cfg, flow=None) -> list:
    """u(t0, .) on the grid nodes for each measure, in input order."""
    jobs = [(h, g, m, t0, cfg, flow) for m in measures]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_initial_row, jobs))
    return [_initial_row(j) for j in jobs]


def _spline(cfg: MasterEvalConfig, row) -> CubicSpline:
    return CubicSpline(cfg.grid.nodes, row)


def _check_inside(cfg, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < cfg.grid.nodes[0]) or np.any(x > cfg.grid.nodes[-1]):
        raise ValueError("evaluation point outside the solver grid")
    return x


def eval_V(t0: float, x, mu: DiscreteMeasure, h, g, cfg: MasterEvalConfig):
    """V(t0, x, mu) from a fresh solve, cubic-interpolated in x."""
    x = _check_inside(cfg, x)
    sol = master_solve(h, g, mu, t0, cfg)
    out = sol.value(0, x)
    return float(out) if out.ndim == 0 else out


def eval_dxV(t0: float, x, mu: DiscreteMeasure, h, g, cfg: MasterEvalConfig):
    x = _check_inside(cfg, x)
    out = master_solve(h, g, mu, t0, cfg).gradient(0, x)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# measure derivatives
# --------------------------------------------------------------------------


def _group(mu: DiscreteMeasure, k):
    idx = np.atleast_1d(np.asarray(k, dtype=int))
    if idx.size == 0:
        raise ValueError("empty atom group")
    if np.any(idx < 0) or np.any(idx >= mu.size):
        raise IndexError(f"atom index out of range for {mu.size} atoms")
    w = float(mu.weights[idx].sum())
    if w < WEIGHT_FLOOR:
        raise WeightFloorError(f"atom weight {w:.3e} is below the floor {WEIGHT_FLOOR:g}")
    return idx, w


def _moved(mu, idx, s):
    shifts = np.zeros_like(mu.atoms)
    shifts[idx, 0] = s
    return shift_atoms(mu, shifts)


def dmu_row(t0: float, mu: DiscreteMeasure, k, h, g, cfg: MasterEvalConfig,
            base: MfgSolution | None = None) -> np.ndarray:
    """d_mu V(t0, ., mu, x_k) on the grid nodes.

    ``k`` may be one atom or a group of atoms moved rigidly together, in
    which case the result is the weight-averaged derivative over the group.
    """
    if mu.dim != 1:
        raise ValueError("the master field is evaluated in one dimension")
    idx, w = _group(mu, k)
    if base is None:
        base = master_solve(h, g, mu, t0, cfg)
    eps = cfg.step
    steps = [eps, 0.5 * eps] if cfg.richardson else [eps]
    measures = []
    for s in steps:
        measures += [_moved(mu, idx, s), _moved(mu, idx, -s)]
    rows = _rows(h, g, measures, t0, cfg, base.rho)
    quotients = [(rows[2 * i] - rows[2 * i + 1]) / (2 * s * w) for i, s in enumerate(steps)]
    if cfg.richardson:
        return (4.0 * quotients[1] - quotients[0]) / 3.0
    return quotients[0]


def d_mu_V(t0: float, x, mu: DiscreteMeasure, k, h, g, cfg: MasterEvalConfig,
           base: MfgSolution | None = None):
    """Numerical d_mu V(t0, x, mu, x_k)."""
    x = _check_inside(cfg, x)
    out = _spline(cfg, dmu_row(t0, mu, k, h, g, cfg, base))(x)
    return float(out) if out.ndim == 0 else out


def dxmu_from_row(cfg: MasterEvalConfig, row, x):
    """Central x-difference, step one cell, of an interpolated d_mu V row."""
    sp = _spline(cfg, row)
    dx = cfg.grid.dx
    x = np.clip(np.asarray(x, dtype=float), cfg.grid.nodes[0] + dx, cfg.grid.nodes[-1] - dx)
    return (sp(x + dx) - sp(x - dx)) / (2 * dx)


def d_x_mu_V(t0: float, x, mu: DiscreteMeasure, k, h, g, cfg: MasterEvalConfig,
             base: MfgSolution | None = None):
    """Numerical d_x d_mu V(t0, x, mu, x_k) (a scalar in one dimension)."""
    x = _check_inside(cfg, x)
    out = dxmu_from_row(cfg, dmu_row(t0, mu, k, h, g, cfg, base), x)
    return float(out) if np.ndim(out) == 0 else out


def measure_hessian(t0: float, x: float, mu: DiscreteMeasure, h, g, cfg: MasterEvalConfig,
                    atoms=None) -> np.ndarray:
    """Matrix S[k, l] = d/dy_l (w_k d_mu V(t0, x, mu, y_k)) for the atoms listed.

    Row k is obtained by differencing the k-th weighted measure derivative
    along a shift of atom l, so symmetry is a check on the solver rather than
    on the formula.
    """
    atoms = list(range(mu.size)) if atoms is None else list(atoms)
    x = _check_inside(cfg, x)
    base = master_solve(h, g, mu, t0, cfg)
    e = cfg.step
    n = len(atoms)
    S = np.empty((n, n))
    for b, l in enumerate(atoms):
        plus = _moved(mu, [l], e)
        minus = _moved(mu, [l], -e)
        for a, k in enumerate(atoms):
            measures = [_moved(plus, [k], e), _moved(plus, [k], -e),
                        _moved(minus, [k], e), _moved(minus, [k], -e)]
            r = [_spline(cfg, row)(x) for row in _rows(h, g, measures, t0, cfg, base.rho)]
            S[a, b] = ((r[0] - r[1]) - (r[2] - r[3])) / (4 * e * e)
    return S


# --------------------------------------------------------------------------
# Lipschitz sampling
# --------------------------------------------------------------------------


def lipschitz_estimate(t0: float, x, base_mu: DiscreteMeasure, h, g, cfg: MasterEvalConfig,
                       metric: str = "W2", trials: int = 50, seed: int = 0,
                       scales=(1e-1, 1e-2, 1e-3)) -> LipschitzReport:
    """Empirical sup of |V(nu) - V(mu)| / W(mu, nu) over atom jitters of mu.

    The same is recorded for d_x V.  Values are measured maxima, not
    certified constants.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    p = {"W1": 1, "W2": 2}.get(metric.upper())
    if p is None:
        raise ValueError("metric must be 'W1' or 'W2'")
    x = np.atleast_1d(_check_inside(cfg, x))
    base = master_solve(h, g, base_mu, t0, cfg)
    v0, d0 = base.value(0, x), base.gradient(0, x)
    rng = np.random.default_rng(seed)
    jitters = [rng.standard_normal(base_mu.atoms.shape) for _ in range(trials)]
    per_scale, per_scale_dx = [], []
    best = (-1.0, None)
    for s in scales:
        measures = [shift_atoms(base_mu, s * j) for j in jitters]
        rows = _rows(h, g, measures, t0, cfg, base.rho)
        r_v, r_d = [], []
        for i, (m, row) in enumerate(zip(measures, rows)):
            dist = wasserstein(base_mu, m, p)
            sp = _spline(cfg, row)
            if dist <= 0:
                continue
            rv = float(np.max(np.abs(sp(x) - v0))) / dist
            rd = float(np.max(np.abs(sp(x, 1) - d0))) / dist
            r_v.append(rv)
            r_d.append(rd)
            if rv > best[0]:
                best = (rv, {"scale": s, "trial": i, "distance": dist,
                             "perturbed": m.to_dict()})
        per_scale.append(max(r_v, default=0.0))
        per_scale_dx.append(max(r_d, default=0.0))
    witness = {"base": base_mu.to_dict(), **(best[1] or {})}
    return LipschitzReport(metric.upper(), trials, max(per_scale), per_scale,
                           max(per_scale_dx), per_scale_dx, list(scales), witness)


# --------------------------------------------------------------------------
# structural checks
# --------------------------------------------------------------------------


def displacement_gap(t0: float, mu: DiscreteMeasure, shifts, h, g, cfg: MasterEvalConfig) -> float:
    """E< d_x V(xi1, L1) - d_x V(xi2, L2), xi1 - xi2 > for xi2 = xi1 + shifts."""
    shifts = np.asarray(shifts, dtype=float).reshape(mu.atoms.shape)
    nu = shift_atoms(mu, shifts)
    s1 = master_solve(h, g, mu, t0, cfg)
    s2 = master_solve(h, g, nu, t0, cfg, s1.rho)
    x1, x2 = mu.atoms[:, 0], nu.atoms[:, 0]
    diff = s1.gradient(0, x1) - s2.gradient(0, x2)
    return float(mu.weights @ (diff * (x1 - x2)))


def first_order_residual(t0: float, x: float, mu: DiscreteMeasure, shifts, h, g,
                         cfg: MasterEvalConfig, amplitudes=(1.0, 0.5)) -> list:
    """|V(mu + a delta) - V(mu) - a sum_k w_k d_mu V(x_k) delta_k| for each amplitude a."""
    shifts = np.asarray(shifts, dtype=float).reshape(-1)
    x = _check_inside(cfg, x)
    base = master_solve(h, g, mu, t0, cfg)
    v0 = float(base.value(0, x))
    grads = np.array([float(_spline(cfg, dmu_row(t0, mu, k, h, g, cfg, base))(x))
                      for k in range(mu.size)])
    slope = float(np.sum(mu.weights * grads * shifts))
    rows = _rows(h, g, [shift_atoms(mu, a * shifts[:, None]) for a in amplitudes], t0, cfg,
                 base.rho)
    return [abs(float(_spline(cfg, r)(x)) - v0 - a * slope) for a, r in zip(amplitudes, rows)]
