"""Particle simulation of the equilibrium flow and of its first variation,
and the dissipation profile of the displacement form of V along it.

Without common noise the conditional expectations over independent copies
are plain weighted sums over the particle cloud.  The variation dX obeys

    dX' = -[H_px dX + H_pp (V_xx dX + E~[V_xmu(X, X~) dX~]) + E~[H_pmu(X, X~) dX~]]

which is linear and driven by the same Brownian path as X (it needs none of
its own).  V_xmu is measured at a few checkpoints by re-solving the mean
field system, with the population grouped into equal-mass bins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import GridEscapeError
from .master_surface import MasterEvalConfig, dmu_row
from .measures import DiscreteMeasure, TangentSample
from .mfg_solver import MfgSolution
from .monotonicity import displacement_form_hamiltonian, displacement_form_surface

logger = logging.getLogger(__name__)


def particle_cloud(mu0: DiscreteMeasure, tangents, per_atom: int) -> TangentSample:
    """Replicate each atom (and its tangent) ``per_atom`` times."""
    if per_atom < 1:
        raise ValueError("per_atom must be >= 1")
    tangents = np.asarray(tangents, dtype=float).reshape(mu0.atoms.shape)
    atoms = np.repeat(mu0.atoms, per_atom, axis=0)
    weights = np.repeat(mu0.weights, per_atom) / per_atom
    return TangentSample(DiscreteMeasure(atoms, weights / weights.sum()),
                         np.repeat(tangents, per_atom, axis=0))


@dataclass
class CheckpointTable:
    """Bin-averaged d_x d_mu V(t, x, mu_t, .) on the grid nodes.

    ``rows[b]`` is the table for bin b; ``edges`` separate consecutive bins.
    """

    time: float
    step: int
    edges: np.ndarray
    rows: np.ndarray
    dx: float
    nodes: np.ndarray

    def __post_init__(self):
        self._spline = CubicSpline(self.nodes, self.rows.T)

    def kernel(self, x):
        """(n, B) matrix of d_x d_mu V(x_i, bin b)."""
        lo, hi = self.nodes[0] + self.dx, self.nodes[-1] - self.dx
        x = np.clip(np.asarray(x, dtype=float).reshape(-1), lo, hi)
        return (self._spline(x + self.dx) - self._spline(x - self.dx)) / (2 * self.dx)

    def apply(self, x, weights, dX) -> np.ndarray:
        """E~[V_xmu(x_i, X~) dX~] for each particle i."""
        x = np.asarray(x, dtype=float).reshape(-1)
        bins = np.searchsorted(self.edges, x)
        load = np.bincount(bins, weights=weights * dX, minlength=self.rows.shape[0])
        return self.kernel(x) @ load


def _equal_mass_groups(mu: DiscreteMeasure, n_bins: int):
    """Contiguous groups of sorted atoms with roughly equal mass, plus the
    separating positions."""
    order = np.argsort(mu.atoms[:, 0], kind="stable")
    cum = np.cumsum(mu.weights[order])
    cuts = np.searchsorted(cum, np.arange(1, n_bins) / n_bins)
    cuts = np.unique(np.clip(cuts + 1, 1, mu.size - 1))
    groups = np.split(order, cuts)
    xs = mu.atoms[order, 0]
    edges = np.array([0.5 * (xs[c - 1] + xs[c]) for c in cuts])
    return [g for g in groups if g.size], edges


def checkpoint_table(sol: MfgSolution, n: int, h, g, cfg: MasterEvalConfig,
                     n_bins: int = 20) -> CheckpointTable:
    grid = sol.grid
    mu = sol.measure_at(n)
    t = float(grid.times[n])
    groups, edges = _equal_mass_groups(mu, n_bins)
    base = None
    if n == 0 and abs(t - cfg.grid.t0) < 1e-12:
        base = sol
    rows = np.array([dmu_row(t, mu, grp, h, g, cfg, base) for grp in groups])
    return CheckpointTable(t, n, edges, rows, grid.dx, grid.nodes)


@dataclass
class TerminalKernel:
    """Exact d_x d_mu G evaluated against the particle cloud itself."""

    time: float
    step: int
    g: object

    def apply(self, x, weights, dX) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, 1)
        mu = DiscreteMeasure(pts, weights)
        K = self.g.dxmu(pts, mu, pts)[:, :, 0, 0]
        return K @ (weights * dX)


@dataclass
class FlowTrajectory:
    times: np.ndarray            # checkpoint times
    steps: np.ndarray            # checkpoint indices on the solver time grid
    X: np.ndarray                # (n_particles, n_checkpoints)
    dX: np.ndarray
    weights: np.ndarray
    seed: int
    path_X: np.ndarray           # (nt+1, n_particles), every solver step
    path_dX: np.ndarray
    solution: MfgSolution = field(repr=False)
    tables: list = field(default_factory=list, repr=False)
    n_norm: np.ndarray | None = None   # E<H_pp N, N> at checkpoints, diagnostic

    def __post_init__(self):
        if self.X.shape != self.dX.shape or self.X.shape[1] != len(self.times):
            raise ValueError("inconsistent trajectory shapes")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("checkpoint times must increase")

    def cloud(self, c: int) -> TangentSample:
        return TangentSample(DiscreteMeasure(self.X[:, c:c + 1], self.weights), self.dX[:, c])


def checkpoint_steps(nt: int, count: int) -> np.ndarray:
    if count < 2:
        raise ValueError("need at least two checkpoints")
    steps = np.unique(np.round(np.linspace(0, nt, count)).astype(int))
    if steps.size != count:
        raise ValueError("more checkpoints than time steps")
    return steps


def checkpoint_tables(sol: MfgSolution, h, g, cfg: MasterEvalConfig, checkpoints: int = 5,
                      n_bins: int = 20) -> list:
    """Derivative tables at every checkpoint but the last, where d_x d_mu G
    is used exactly.  They depend on the solved flow only, so runs that share
    the solution can share them."""
    steps = checkpoint_steps(sol.grid.nt, checkpoints)
    tables = [checkpoint_table(sol, int(n), h, g, cfg, n_bins) for n in steps[:-1]]
    tables.append(TerminalKernel(float(sol.grid.T), int(steps[-1]), g))
    return tables


def simulate_flow(sol: MfgSolution, h, g, particles: TangentSample, cfg: MasterEvalConfig,
                  checkpoints: int = 5, n_substeps: int = 1, seed: int = 0,
                  n_bins: int = 20, tables: list | None = None) -> FlowTrajectory:
    """Euler-Maruyama for X and explicit Euler for the variation dX."""
    grid = sol.grid
    if (cfg.grid.x_min, cfg.grid.x_max, cfg.grid.nx) != (grid.x_min, grid.x_max, grid.nx) \
            or abs(cfg.grid.dt - grid.dt) > 1e-12 or abs(cfg.grid.T - grid.T) > 1e-12:
        raise ValueError("master evaluation grid must match the solution grid")
    if particles.base.dim != 1:
        raise ValueError("particle simulation is one-dimensional")
    steps = checkpoint_steps(grid.nt, checkpoints)
    x = np.array(particles.atoms[:, 0])
    d = np.array(particles.tangents[:, 0])
    w = np.array(particles.weights)
    lo, hi = grid.nodes[0], grid.nodes[-1]
    _check_escape(x, lo, hi, grid.t0)

    if tables is None:
        tables = checkpoint_tables(sol, h, g, cfg, checkpoints, n_bins)
    elif [t.step for t in tables] != list(steps):
        raise ValueError("precomputed tables do not match the checkpoints")
    rng = np.random.default_rng(seed)
    dt = grid.dt / n_substeps
    sq = np.sqrt(dt)
    path_X = np.empty((grid.nt + 1, x.size))
    path_d = np.empty_like(path_X)
    path_X[0], path_d[0] = x, d

    for n in range(grid.nt):
        mu = sol.measure_at(n)
        sp0, sp1 = sol.spline(n), sol.spline(n + 1)
        c = int(np.searchsorted(steps, n, side="right")) - 1
        for j in range(n_substeps):
            # coefficients are interpolated linearly in time between solver
            # levels and between checkpoint tables
            s = j / n_substeps
            theta = (n + s - steps[c]) / (steps[c + 1] - steps[c])
            p = (1 - s) * sp0(x, 1) + s * sp1(x, 1)
            uxx = (1 - s) * sp0(x, 2) + s * sp1(x, 2)
            pts = x[:, None]
            Hp = h.dp(pts, mu, p[:, None])[:, 0]
            Hpx = h.dxp(pts, mu, p[:, None])[:, 0, 0]
            Hpp = h.dpp(pts, mu, p[:, None])[:, 0, 0]
            A = (1 - theta) * tables[c].apply(x, w, d)
            if theta > 0:
                A = A + theta * tables[c + 1].apply(x, w, d)
            B = h.dpmu(pts, mu, pts, p[:, None])[:, :, 0, 0] @ (w * d)
            d = d - dt * (Hpx * d + Hpp * (uxx * d + A) + B)
            x = x - dt * Hp + sq * rng.standard_normal(x.size)
        _check_escape(x, lo, hi, float(grid.times[n + 1]))
        path_X[n + 1], path_d[n + 1] = x, d

    X = path_X[steps].T.copy()
    dX = path_d[steps].T.copy()
    traj = FlowTrajectory(grid.times[steps].copy(), steps, X, dX, w, seed, path_X, path_d,
                          sol, tables)
    traj.n_norm = np.array([_n_norm(traj, k, h) for k in range(len(steps))])
    return traj


def _check_escape(x, lo, hi, t):
    bad = np.flatnonzero((x < lo) | (x > hi))
    if bad.size:
        i = int(bad[0])
        raise GridEscapeError(f"particle {i} left the grid at t={t:.6g} (x={x[i]:.4g})",
                              particle=i, time=t)


def _n_norm(traj: FlowTrajectory, k: int, h) -> float:
    """E<H_pp N, N> with N = E~[V_xmu dX~] + V_xx dX + (1/2) H_pp^{-1} E~[H_pmu dX~]."""
    sol = traj.solution
    n = int(traj.steps[k])
    x, d, w = traj.X[:, k], traj.dX[:, k], traj.weights
    mu = sol.measure_at(n)
    p = sol.gradient(n, x)[:, None]
    pts = x[:, None]
    Hpp = h.dpp(pts, mu, p)[:, 0, 0]
    B = h.dpmu(pts, mu, pts, p)[:, :, 0, 0] @ (w * d)
    N = traj.tables[k].apply(x, w, d) + sol.curvature(n, x) * d + 0.5 * B / Hpp
    return float(w @ (Hpp * N * N))


# --------------------------------------------------------------------------
# dissipation profile and rate inequality
# --------------------------------------------------------------------------


@dataclass
class DissipationProfile:
    times: np.ndarray
    values: np.ndarray
    rate_bound: np.ndarray | None
    tol: float
    verdict: str
    terminal_form: float

    def __post_init__(self):
        if len(self.values) != len(self.times):
            raise ValueError("values and times differ in length")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "values": self.values.tolist(),
                "rate_bound": None if self.rate_bound is None else self.rate_bound.tolist(),
                "tol": self.tol, "verdict": self.verdict, "terminal_form": self.terminal_form}


def displacement_value(traj: FlowTrajectory, k: int) -> float:
    """I(t) + Ibar(t) at checkpoint k."""
    x, d, w = traj.X[:, k], traj.dX[:, k], traj.weights
    if k == len(traj.times) - 1:
        return displacement_form_surface(traj.tables[k].g, traj.cloud(k))
    cross = float(w @ (d * traj.tables[k].apply(x, w, d)))
    diag = float(w @ (traj.solution.curvature(int(traj.steps[k]), x) * d * d))
    return cross + diag


def displ_h_along(traj: FlowTrajectory, h, n: int) -> float:
    """E[displ H] on the particle cloud at solver step n with phi = d_x u(t_n, .)."""
    sol = traj.solution
    cloud = TangentSample(DiscreteMeasure(traj.path_X[n][:, None], traj.weights),
                          traj.path_dX[n])
    sp = sol.spline(n)
    return displacement_form_hamiltonian(h, cloud, lambda pts: sp(pts[:, 0], 1)[:, None])


def dissipation_profile(traj: FlowTrajectory, h=None, g=None, cfg=None,
                        rel_tol: float = 1e-3, abs_tol: float = 1e-6,
                        with_rate: bool = False) -> DissipationProfile:
    """I + Ibar at each checkpoint; pass iff nonincreasing within
    rel_tol * |initial| and the terminal value is >= -abs_tol."""
    values = np.array([displacement_value(traj, k) for k in range(len(traj.times))])
    tol = rel_tol * abs(values[0])
    ok = bool(np.all(np.diff(values) <= tol) and values[-1] >= -abs_tol)
    rate = None
    if with_rate:
        if h is None:
            raise ValueError("the rate bound needs the Hamiltonian")
        rate = np.array([displ_h_along(traj, h, int(n)) for n in traj.steps])
    return DissipationProfile(traj.times.copy(), values, rate, tol, "pass" if ok else "fail",
                              float(values[-1]))


@dataclass
class RateReport:
    intervals: list
    tol: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"intervals": self.intervals, "tol": self.tol, "verdict": self.verdict}


def rate_check(traj: FlowTrajectory, h, g=None, cfg=None, profile: DissipationProfile | None = None,
               rel_tol: float = 1e-3) -> RateReport:
    """Compare the change of I + Ibar over each checkpoint interval with the
    trapezoidal time integral of E[displ H] over the same interval.

    Two readings are recorded.  ``growth_ok``: the increase of I + Ibar is at
    most the integral (the derivative of I + Ibar is bounded above by the
    form).  ``decrement_ok``: the decrease is at least the integral.  The
    verdict requires both.
    """
    if profile is None:
        profile = dissipation_profile(traj)
    sol = traj.solution
    steps = traj.steps
    rates = np.array([displ_h_along(traj, h, n) for n in range(steps[0], steps[-1] + 1)])
    times = sol.grid.times[steps[0]:steps[-1] + 1]
    scale = max(abs(profile.values[0]), np.max(np.abs(profile.values)), 1e-300)
    tol = rel_tol * scale
    intervals = []
    for k in range(len(steps) - 1):
        a, b = steps[k] - steps[0], steps[k + 1] - steps[0]
        integral = float(np.trapezoid(rates[a:b + 1], times[a:b + 1]))
        decrement = float(profile.values[k] - profile.values[k + 1])
        intervals.append({
            "t_start": float(traj.times[k]), "t_end": float(traj.times[k + 1]),
            "decrement": decrement, "integral": integral,
            "growth_ok": bool(-decrement <= integral + tol),
            "decrement_ok": bool(decrement >= integral - tol),
        })
    ok = all(i["growth_ok"] and i["decrement_ok"] for i in intervals)
    return RateReport(intervals, tol, "pass" if ok else "fail")
