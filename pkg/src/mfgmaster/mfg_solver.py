"""Finite-difference solver for the 1-d mean field system without common noise.

    -d_t u - (1/2) d_xx u + H(x, rho_t, d_x u) = 0,    u(T) = G(., rho_T)
     d_t rho - (1/2) d_xx rho - d_x(rho d_p H(x, rho_t, d_x u)) = 0,   rho(t0) = mu0

Nodes are cell centres.  The HJB step is implicit with the Hamiltonian
linearised around the previous time level; the gradient is central where the
cell Peclet number allows a monotone matrix and upwind elsewhere.  The
Fokker-Planck step is an implicit Scharfetter-Gummel (Chang-Cooper type)
finite-volume scheme with zero-flux walls, so mass is conserved exactly and
positivity is preserved.  The coupled system is solved by a damped Picard
iteration, optionally split into time windows that are swept until the seams
agree.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import ConvergenceError, SolverError
from .hamiltonian.base import HamiltonianModel, TerminalCostModel
from .measures import DiscreteMeasure

logger = logging.getLogger(__name__)

DIFFUSION = 0.5


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    nx: int
    t0: float
    T: float
    nt: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("need x_min < x_max")
        if self.nx < 8:
            raise ValueError("nx must be >= 8")
        if self.nt < 4:
            raise ValueError("nt must be >= 4")
        if not self.T > self.t0:
            raise ValueError("need T > t0")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.nt

    @property
    def cfl(self) -> float:
        """dt / dx^2, recorded for diagnostics only (the scheme is implicit)."""
        return self.dt / self.dx**2

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(1, self.nx) * self.dx

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.nt + 1) * self.dt

    def required_interval(self, mu0: DiscreteMeasure, drift_bound: float = 0.0):
        pad = drift_bound * (self.T - self.t0) + 5.0 * np.sqrt(self.T - self.t0)
        return float(mu0.atoms.min()) - pad, float(mu0.atoms.max()) + pad

    def covers(self, mu0: DiscreteMeasure, drift_bound: float = 0.0) -> bool:
        lo, hi = self.required_interval(mu0, drift_bound)
        return self.x_min <= lo and hi <= self.x_max

    def require_cover(self, mu0: DiscreteMeasure, drift_bound: float = 0.0):
        if not self.covers(mu0, drift_bound):
            lo, hi = self.required_interval(mu0, drift_bound)
            raise ValueError(
                f"grid [{self.x_min:g}, {self.x_max:g}] does not contain the inflated support "
                f"[{lo:.4g}, {hi:.4g}]")

    @classmethod
    def around(cls, mu0: DiscreteMeasure, t0: float, T: float, nx: int, nt: int,
               drift_bound: float = 0.0, margin: float = 0.0) -> Grid1D:
        pad = drift_bound * (T - t0) + 5.0 * np.sqrt(T - t0) + margin
        return cls(float(mu0.atoms.min()) - pad, float(mu0.atoms.max()) + pad, nx, t0, T, nt)

    def sub(self, t_start: float) -> Grid1D:
        """Same spatial grid and time step, horizon [t_start, T]."""
        k = int(round((t_start - self.t0) / self.dt))
        if abs(self.t0 + k * self.dt - t_start) > 1e-9 * max(1.0, abs(t_start)):
            raise ValueError("t_start must lie on the time grid")
        if k >= self.nt:
            raise ValueError("t_start must be before T")
        return Grid1D(self.x_min, self.x_max, self.nx, self.t0 + k * self.dt, self.T,
                      self.nt - k)

    def window(self, i0: int, i1: int) -> Grid1D:
        return Grid1D(self.x_min, self.x_max, self.nx, self.t0 + i0 * self.dt,
                      self.t0 + i1 * self.dt, i1 - i0)

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "nx": self.nx, "t0": self.t0,
                "T": self.T, "nt": self.nt, "cfl": self.cfl}


def density_measure(grid: Grid1D, rho_row) -> DiscreteMeasure:
    """Cells become atoms at their centres carrying the cell masses."""
    return DiscreteMeasure.from_density(grid.nodes[:, None], np.asarray(rho_row) * grid.dx)


def deposit(mu0: DiscreteMeasure, grid: Grid1D):
    """Linear-hat splitting of atoms onto cell centres.

    Returns (density, projected) where projected flags atoms that had to be
    moved onto the grid.
    """
    if mu0.dim != 1:
        raise ValueError("the PDE solver is one-dimensional")
    x = grid.nodes
    y = mu0.atoms[:, 0]
    outside = (y < grid.x_min) | (y > grid.x_max)
    y = np.clip(y, x[0], x[-1])
    pos = (y - x[0]) / grid.dx
    j = np.minimum(np.floor(pos).astype(int), grid.nx - 2)
    theta = pos - j
    mass = np.zeros(grid.nx)
    np.add.at(mass, j, mu0.weights * (1.0 - theta))
    np.add.at(mass, j + 1, mu0.weights * theta)
    if outside.any():
        warnings.warn(f"{int(outside.sum())} atoms outside the grid were projected", stacklevel=2)
    return mass / grid.dx, bool(outside.any())


# --------------------------------------------------------------------------
# HJB
# --------------------------------------------------------------------------


def _grad_and_curv(U, dx):
    """Node gradient (central inside, corrected one-sided at the ends) and the
    curvature used at the two boundary nodes."""
    p = np.empty_like(U)
    p[1:-1] = (U[2:] - U[:-2]) / (2 * dx)
    k_left = (U[0] - 2 * U[1] + U[2]) / dx**2
    k_right = (U[-3] - 2 * U[-2] + U[-1]) / dx**2
    p[0] = (U[1] - U[0]) / dx - 0.5 * dx * k_left
    p[-1] = (U[-1] - U[-2]) / dx + 0.5 * dx * k_right
    return p, k_left, k_right


def _hjb_step(h, x, mu, U, dt, dx):
    n = U.shape[0]
    p_star, kl, kr = _grad_and_curv(U, dx)
    xs = x[:, None]
    ps = p_star[:, None]
    Hs = h.value(xs, mu, ps)
    Hp = h.dp(xs, mu, ps)[:, 0]
    inv_dx2 = 1.0 / dx**2
    lower = np.zeros(n)   # coefficient of u_{i-1}
    diag = np.full(n, 1.0 / dt)
    upper = np.zeros(n)   # coefficient of u_{i+1}
    rhs = U / dt - Hs + Hp * p_star

    # interior diffusion
    diag[1:-1] += inv_dx2
    lower[1:-1] -= 0.5 * inv_dx2
    upper[1:-1] -= 0.5 * inv_dx2
    # interior transport Hp * Du
    hpi = Hp[1:-1]
    central = np.abs(hpi) * dx <= 1.0
    back = ~central & (hpi > 0)
    fwd = ~central & (hpi <= 0)
    upper[1:-1] += np.where(central, hpi / (2 * dx), np.where(fwd, hpi / dx, 0.0))
    lower[1:-1] += np.where(central, -hpi / (2 * dx), np.where(back, -hpi / dx, 0.0))
    diag[1:-1] += np.where(back, hpi / dx, np.where(fwd, -hpi / dx, 0.0))

    # boundary rows: lagged curvature; transport implicit only when the
    # characteristic points into the domain
    rhs[0] += 0.5 * kl
    rhs[-1] += 0.5 * kr
    if Hp[0] <= 0:
        diag[0] += -Hp[0] / dx
        upper[0] += Hp[0] / dx
        rhs[0] += Hp[0] * 0.5 * dx * kl
    else:
        rhs[0] -= Hp[0] * p_star[0]
    if Hp[-1] >= 0:
        diag[-1] += Hp[-1] / dx
        lower[-1] += -Hp[-1] / dx
        rhs[-1] -= Hp[-1] * 0.5 * dx * kr
    else:
        rhs[-1] -= Hp[-1] * p_star[-1]

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def solve_hjb(h: HamiltonianModel, terminal, rho_flow, grid: Grid1D, measures=None) -> np.ndarray:
    """Backward implicit sweep; returns u of shape (nt+1, nx)."""
    x = grid.nodes
    u = np.empty((grid.nt + 1, grid.nx))
    u[-1] = terminal
    if not np.all(np.isfinite(u[-1])):
        raise SolverError("terminal condition is not finite")
    if measures is None:
        measures = [density_measure(grid, r) for r in rho_flow]
    for n in range(grid.nt - 1, -1, -1):
        u[n] = _hjb_step(h, x, measures[n], u[n + 1], grid.dt, grid.dx)
        if not np.all(np.isfinite(u[n])):
            raise SolverError(f"HJB produced non-finite values at step {n}")
    return u


def hjb_residual(h: HamiltonianModel, u, rho_flow, grid: Grid1D) -> np.ndarray:
    """Discrete HJB operator with the exact Hamiltonian, interior nodes only."""
    x = grid.nodes[1:-1, None]
    res = np.empty((grid.nt, grid.nx - 2))
    for n in range(grid.nt):
        mu = density_measure(grid, rho_flow[n])
        un = u[n]
        p = ((un[2:] - un[:-2]) / (2 * grid.dx))[:, None]
        lap = (un[2:] - 2 * un[1:-1] + un[:-2]) / grid.dx**2
        res[n] = ((un[1:-1] - u[n + 1][1:-1]) / grid.dt - DIFFUSION * lap
                  + h.value(x, mu, p))
    return res


# --------------------------------------------------------------------------
# Fokker-Planck
# --------------------------------------------------------------------------


def _bernoulli(z):
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-12
    out[nz] = z[nz] / np.expm1(z[nz])
    return out


def face_drift(h: HamiltonianModel, u, grid: Grid1D, measures) -> np.ndarray:
    """Drift -dp H at the faces, shape (nt+1, nx-1)."""
    xf = grid.faces[:, None]
    out = np.empty((grid.nt + 1, grid.nx - 1))
    for n in range(grid.nt + 1):
        pf = (np.diff(u[n]) / grid.dx)[:, None]
        out[n] = -h.dp(xf, measures[n], pf)[:, 0]
    return out


def _fp_step(rho, v, dt, dx):
    n = rho.shape[0]
    z = v * dx / DIFFUSION
    c = DIFFUSION / dx**2
    bm = _bernoulli(-z) * c   # weight on rho_i in J_{i+1/2}
    bp = _bernoulli(z) * c    # weight on rho_{i+1}
    diag = np.full(n, 1.0 / dt)
    diag[:-1] += bm
    diag[1:] += bp
    ab = np.zeros((3, n))
    ab[0, 1:] = -bp           # upper: rho_{i+1} in row i
    ab[1] = diag
    ab[2, :-1] = -bm          # lower: rho_{i-1} in row i
    return solve_banded((1, 1), ab, rho / dt, check_finite=False)


def solve_fp(drift, mu0, grid: Grid1D) -> np.ndarray:
    """Forward implicit sweep.  ``drift`` holds face values (nt+1, nx-1) or node
    values (nt+1, nx), which are averaged onto faces.  ``mu0`` is a measure or
    an initial density row."""
    drift = np.asarray(drift, dtype=float)
    if drift.shape[1] == grid.nx:
        drift = 0.5 * (drift[:, 1:] + drift[:, :-1])
    if isinstance(mu0, DiscreteMeasure):
        rho0, _ = deposit(mu0, grid)
    else:
        rho0 = np.asarray(mu0, dtype=float)
    rho = np.empty((grid.nt + 1, grid.nx))
    rho[0] = rho0
    for n in range(grid.nt):
        rho[n + 1] = _fp_step(rho[n], drift[n + 1], grid.dt, grid.dx)
        low = rho[n + 1].min() * grid.dx
        if low < -1e-12:
            raise SolverError(f"negative mass {low:.3e} after FP step {n + 1}")
        np.maximum(rho[n + 1], 0.0, out=rho[n + 1])
    return rho


# --------------------------------------------------------------------------
# coupled system
# --------------------------------------------------------------------------


@dataclass
class MfgSolution:
    grid: Grid1D
    u: np.ndarray
    rho: np.ndarray
    residual_history: list
    iterations: int
    partition: list = field(default_factory=list)
    projected: bool = False

    def measure_at(self, n: int) -> DiscreteMeasure:
        return density_measure(self.grid, self.rho[n])

    def mass(self) -> np.ndarray:
        return self.rho.sum(axis=1) * self.grid.dx

    def mean_path(self) -> np.ndarray:
        return self.rho @ self.grid.nodes * self.grid.dx

    def time_index(self, t: float) -> int:
        k = int(round((t - self.grid.t0) / self.grid.dt))
        if not 0 <= k <= self.grid.nt or abs(self.grid.t0 + k * self.grid.dt - t) > 1e-9:
            raise ValueError(f"t={t} is not on the time grid")
        return k

    def spline(self, n: int) -> CubicSpline:
        return CubicSpline(self.grid.nodes, self.u[n])

    def value(self, n: int, x) -> np.ndarray:
        return self.spline(n)(np.asarray(x, dtype=float))

    def gradient(self, n: int, x) -> np.ndarray:
        return self.spline(n)(np.asarray(x, dtype=float), 1)

    def curvature(self, n: int, x) -> np.ndarray:
        return self.spline(n)(np.asarray(x, dtype=float), 2)

    def csv_rows(self):
        t = self.grid.times
        x = self.grid.nodes
        T, X = np.meshgrid(t, x, indexing="ij")
        return np.column_stack([T.ravel(), X.ravel(), self.u.ravel(), self.rho.ravel()])


def _sup_l1(a, b, dx):
    return float(np.max(np.sum(np.abs(a - b), axis=1)) * dx)


def _terminal_from_g(g: TerminalCostModel, grid: Grid1D):
    x = grid.nodes[:, None]
    return lambda measure: g.value(x, measure)


def _picard(h, terminal_fn, rho0, grid, lam, tol, max_iter, initial_flow=None):
    """Damped fixed point on the flow; terminal_fn maps the terminal measure to u_T."""
    if initial_flow is None:
        flow = np.repeat(rho0[None, :], grid.nt + 1, axis=0)
        warm = False
    else:
        flow = np.array(initial_flow, dtype=float)
        flow[0] = rho0
        warm = True
    history = []
    lam_k = lam
    increases = 0
    u = None
    for k in range(max_iter + 1):
        measures = [density_measure(grid, r) for r in flow]
        u = solve_hjb(h, terminal_fn(measures[-1]), flow, grid, measures)
        new = solve_fp(face_drift(h, u, grid, measures), rho0, grid)
        res = _sup_l1(new, flow, grid.dx)
        history.append(res)
        if res <= tol:
            flow = new
            break
        if k == max_iter:
            raise ConvergenceError(
                f"Picard iteration did not reach tol={tol:g} in {max_iter} iterations "
                f"(last residual {res:.3e})", history)
        if len(history) >= 2 and res > history[-2]:
            increases += 1
            if increases >= 2:
                lam_k *= 0.5
                increases = 0
                logger.info("residual increased twice; damping -> %g", lam_k)
        else:
            increases = 0
        if k == 0 and not warm:
            flow = new
        else:
            flow = (1.0 - lam_k) * flow + lam_k * new
    # recompute u on the accepted flow so the terminal condition is exact
    measures = [density_measure(grid, r) for r in flow]
    u = solve_hjb(h, terminal_fn(measures[-1]), flow, grid, measures)
    return u, flow, history


def solve_mfg(h: HamiltonianModel, g: TerminalCostModel, mu0: DiscreteMeasure, grid: Grid1D,
              damping: float = 0.5, tol: float = 1e-8, max_iter: int = 100,
              partition_len: float = 0.0, drift_bound: float = 0.0,
              initial_flow=None, check_grid: bool = True, max_sweeps: int = 50) -> MfgSolution:
    """Damped Picard solve of the coupled system from (grid.t0, mu0)."""
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if h.dim != 1:
        raise ValueError("the PDE solver is one-dimensional")
    if check_grid:
        grid.require_cover(mu0, drift_bound)
    rho0, projected = deposit(mu0, grid)
    terminal_fn = _terminal_from_g(g, grid)

    if partition_len and partition_len > 0:
        return _solve_partitioned(h, terminal_fn, rho0, grid, damping, tol, max_iter,
                                  partition_len, initial_flow, projected, max_sweeps)

    u, flow, history = _picard(h, terminal_fn, rho0, grid, damping, tol, max_iter, initial_flow)
    logger.debug("solve_mfg converged in %d iterations", len(history) - 1)
    return MfgSolution(grid, u, flow, history, len(history) - 1, [grid.t0], projected)


def _window_bounds(grid: Grid1D, partition_len: float):
    """Windows aligned to the time grid, each at most partition_len long."""
    steps = int(np.floor(partition_len / grid.dt + 1e-9))
    if steps < 4:
        raise ValueError("partition_len must cover at least 4 time steps")
    count = -(-grid.nt // steps)
    cuts = np.round(np.linspace(0, grid.nt, count + 1)).astype(int)
    return [(int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:])]


def _solve_partitioned(h, terminal_fn, rho0, grid, lam, tol, max_iter, partition_len,
                       initial_flow, projected, max_sweeps):
    """Block Gauss-Seidel over time windows.

    Each window is a local mean field problem with its own initial density
    and a frozen terminal value taken from the next window (the true terminal
    cost for the last one).  Backward then forward passes are repeated until
    the stitched flow stops moving; the fixed point is the unpartitioned
    discrete solution.
    """
    windows = _window_bounds(grid, partition_len)
    if initial_flow is None:
        flow = np.repeat(rho0[None, :], grid.nt + 1, axis=0)
    else:
        flow = np.array(initial_flow, dtype=float)
    u = np.zeros((grid.nt + 1, grid.nx))
    history = []
    inner_tol = 0.1 * tol

    def solve_window(j):
        i0, i1 = windows[j]
        sub = grid.window(i0, i1)
        if j == len(windows) - 1:
            term = terminal_fn
        else:
            frozen = u[i1].copy()
            term = lambda _m, frozen=frozen: frozen
        uj, fj, _ = _picard(h, term, flow[i0], sub, lam, inner_tol, max_iter,
                            initial_flow=flow[i0:i1 + 1])
        u[i0:i1 + 1] = uj
        flow[i0:i1 + 1] = fj

    for sweep in range(max_sweeps):
        before_flow = flow.copy()
        before_u = u.copy()
        for j in reversed(range(len(windows))):
            solve_window(j)
        for j in range(len(windows)):
            solve_window(j)
        change = _sup_l1(flow, before_flow, grid.dx)
        u_change = float(np.max(np.abs(u - before_u))) if sweep > 0 else np.inf
        history.append(change)
        logger.debug("partition sweep %d: flow change %.3e, u change %.3e",
                     sweep, change, u_change)
        if change <= tol and u_change <= tol:
            break
    else:
        raise ConvergenceError("partitioned sweeps did not settle", history)
    restarts = [float(grid.t0 + i0 * grid.dt) for i0, _ in windows]
    return MfgSolution(grid, u, flow, history, len(history), restarts, projected)
