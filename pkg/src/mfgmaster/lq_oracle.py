"""ODE-exact solution of the scalar linear-quadratic benchmark.

H(x, mu, p) = p^2/2 - (q/2) x^2 - c x m(mu),   G(x, mu) = (g/2) x^2,

with unit-intensity noise (generator (1/2) d_xx).  The value is
V(t, x, mu) = a_t x^2 / 2 + b_t x + c_t where a, b, c depend on mu only
through its mean:

    a' = a^2 - q,            a_T = g
    m' = -(a m + b),         m_{t0} = m0
    b' = a b - c m,          b_T = 0
    c' = b^2/2 - a/2,        c_T = 0.

Seen as functions of the current mean, b_t = beta_t m + b0_t and
c_t = gamma_t m^2 + ..., with

    beta'  = 2 a beta + beta^2 - c,          beta_T = 0
    gamma' = beta^2 / 2 + 2 gamma (a + beta), gamma_T = 0.

Hence d_mu V(t, x, mu, y) = x beta_t + 2 gamma_t m_t, independent of y.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import RiccatiBlowUp

logger = logging.getLogger(__name__)

BLOWUP = 1e12


@dataclass(frozen=True)
class LqSpec:
    q: float = 1.0
    c: float = 0.5
    g: float = 1.0
    T: float = 1.0
    m0: float = 1.0
    var0: float = 0.25
    t0: float = 0.0

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("terminal curvature g must be >= 0")
        if self.T <= self.t0:
            raise ValueError("need T > t0")

    @property
    def monotone(self) -> bool:
        """Displacement monotone regime of the coupling q E|eta|^2 + c (E eta)^2."""
        return self.q >= 0 and self.q + self.c >= 0


@dataclass(frozen=True)
class LqCoefficients:
    spec: LqSpec
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    m: np.ndarray
    beta: np.ndarray      # d_m b
    gamma: np.ndarray     # c_t = gamma_t m^2 + lower order
    shoot_sensitivity: float

    @property
    def dm_b(self):
        return self.beta

    @property
    def dm_c(self):
        return 2.0 * self.gamma * self.m

    def at(self, name: str, t) -> np.ndarray:
        return np.interp(t, self.t, getattr(self, name))

    def to_rows(self):
        return np.column_stack([self.t, self.a, self.b, self.c, self.m, self.dm_b, self.dm_c])


def _rk4(f, y0, t):
    """Classical RK4 on the grid t (may be decreasing)."""
    y = np.empty((t.shape[0],) + np.shape(y0))
    y[0] = y0
    for i in range(t.shape[0] - 1):
        h = t[i + 1] - t[i]
        k1 = f(t[i], y[i])
        k2 = f(t[i] + h / 2, y[i] + h / 2 * k1)
        k3 = f(t[i] + h / 2, y[i] + h / 2 * k2)
        k4 = f(t[i + 1], y[i] + h * k3)
        y[i + 1] = y[i] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y[i + 1])) or np.max(np.abs(y[i + 1])) > BLOWUP:
            raise RiccatiBlowUp(f"Riccati solution blew up near t={t[i + 1]:.6g}", time=t[i + 1])
    return y


def solve_lq(spec: LqSpec, ode_steps: int = 10_000) -> LqCoefficients:
    if ode_steps < 100:
        raise ValueError("ode_steps must be >= 100")
    q, cc, g = spec.q, spec.c, spec.g
    t = np.linspace(spec.t0, spec.T, ode_steps + 1)
    tb = t[::-1]

    # a, beta and gamma are autonomous given a, so integrate them jointly backward
    def back(_, y):
        a, beta, gam = y
        return np.array([a * a - q, 2 * a * beta + beta * beta - cc,
                         0.5 * beta * beta + 2 * gam * (a + beta)])

    ab = _rk4(back, np.array([g, 0.0, 0.0]), tb)[::-1]
    a, beta, gamma = ab[:, 0], ab[:, 1], ab[:, 2]

    # the (m, b) system is linear; shoot on b(t0) with two forward solves.
    # a rides along as a state so RK4 midpoints see exact values; the running
    # integral of c' gives c_t = C_t - C_T.
    def fwd(_, y):
        aa, m, b, _c = y
        return np.array([aa * aa - q, -(aa * m + b), aa * b - cc * m, 0.5 * b * b - 0.5 * aa])

    def b0_for(m0):
        y0 = _rk4(fwd, np.array([a[0], m0, 0.0, 0.0]), t)
        y1 = _rk4(fwd, np.array([a[0], m0, 1.0, 0.0]), t)
        slope = y1[-1, 2] - y0[-1, 2]
        if abs(slope) < 1e-300:
            raise RiccatiBlowUp("degenerate shooting map", time=spec.t0)
        return -y0[-1, 2] / slope

    b0 = b0_for(spec.m0)
    y = _rk4(fwd, np.array([a[0], spec.m0, b0, 0.0]), t)
    m, b = y[:, 1], y[:, 2]
    c = y[:, 3] - y[-1, 3]
    # d b(t0) / d m0 from the shooting map; must agree with beta(t0)
    sens = b0_for(1.0) - b0_for(0.0)
    return LqCoefficients(spec, t, a, b, c, m, beta, gamma, float(sens))


def oracle_V(coeffs: LqCoefficients, t, x):
    a, b, c = coeffs.at("a", t), coeffs.at("b", t), coeffs.at("c", t)
    x = np.asarray(x, dtype=float)
    return 0.5 * a * x**2 + b * x + c


def oracle_dxV(coeffs: LqCoefficients, t, x):
    return coeffs.at("a", t) * np.asarray(x, dtype=float) + coeffs.at("b", t)


def oracle_dmuV(coeffs: LqCoefficients, t, x):
    """d_mu V(t, x, mu_t, y) = x beta_t + 2 gamma_t m_t (any y)."""
    beta = coeffs.at("beta", t)
    return np.asarray(x, dtype=float) * beta + 2.0 * coeffs.at("gamma", t) * coeffs.at("m", t)


def oracle_flow(coeffs: LqCoefficients, mu0=None):
    """Mean path m_t; if a cloud is given its mean must match the spec's m0."""
    if mu0 is not None:
        m0 = float(mu0.mean()[0])
        if abs(m0 - coeffs.spec.m0) > 1e-12:
            spec = LqSpec(**{**coeffs.spec.__dict__, "m0": m0})
            coeffs = solve_lq(spec, coeffs.t.shape[0] - 1)
    return coeffs.t, coeffs.m


def variation_profile(coeffs: LqCoefficients, t, second_moment, mean):
    """a_t E|dX|^2 + beta_t (E dX)^2: the displacement form of V along the flow."""
    return coeffs.at("a", t) * second_moment + coeffs.at("beta", t) * mean**2


def variation_moments(coeffs: LqCoefficients, t_grid, m2_0: float, mean_0: float):
    """Moments of dX' = -(a dX + beta E dX): mean and second moment on t_grid.

    E dX solves e' = -(a + beta) e, and E dX^2 solves s' = -2 a s - 2 beta e^2.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    fine = coeffs.t[(coeffs.t >= t_grid[0]) & (coeffs.t <= t_grid[-1])]
    fine = np.union1d(fine, t_grid)

    def f(s, y):
        e, s2 = y
        a, beta = coeffs.at("a", s), coeffs.at("beta", s)
        return np.array([-(a + beta) * e, -2 * a * s2 - 2 * beta * e * e])

    y = _rk4(f, np.array([mean_0, m2_0]), fine)
    idx = np.searchsorted(fine, t_grid)
    return y[idx, 0], y[idx, 1]
