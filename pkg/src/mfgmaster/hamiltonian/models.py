"""Hamiltonian models: separable ones and the constructed non-separable family."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import ThresholdError
from .base import HamiltonianModel, TerminalCostModel, eye_stack, points
from .surfaces import QuadraticMeanCost, ZeroCost

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# kinetic parts H0(p)
# --------------------------------------------------------------------------


class QuadraticKinetic:
    """K(p) = (s/2)|p|^2."""

    def __init__(self, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)
        self.c0 = self.scale

    def value(self, p):
        return 0.5 * self.scale * np.sum(p**2, axis=1)

    def grad(self, p):
        return self.scale * p

    def hess(self, p):
        return eye_stack(p.shape[0], p.shape[1], self.scale)

    def params(self):
        return {"name": "quadratic", "scale": self.scale}


class LogCoshKinetic:
    """K(p) = (s/2)|p|^2 + eps sum_j log cosh(p_j)."""

    def __init__(self, scale: float = 1.0, eps: float = 0.5):
        if scale <= 0 or eps < 0:
            raise ValueError("need scale > 0 and eps >= 0")
        self.scale = float(scale)
        self.eps = float(eps)
        self.c0 = self.scale

    def value(self, p):
        # log cosh written to avoid overflow
        a = np.abs(p)
        lc = a + np.log1p(np.exp(-2 * a)) - np.log(2.0)
        return 0.5 * self.scale * np.sum(p**2, axis=1) + self.eps * np.sum(lc, axis=1)

    def grad(self, p):
        return self.scale * p + self.eps * np.tanh(p)

    def hess(self, p):
        diag = self.scale + self.eps / np.cosh(p) ** 2
        out = np.zeros(p.shape + (p.shape[1],))
        idx = np.arange(p.shape[1])
        out[:, idx, idx] = diag
        return out

    def params(self):
        return {"name": "logcosh", "scale": self.scale, "eps": self.eps}


# --------------------------------------------------------------------------
# separable H = K(p) - F(x, mu)
# --------------------------------------------------------------------------


class SeparableHamiltonian(HamiltonianModel):
    def __init__(self, kinetic=None, coupling: TerminalCostModel | None = None, dim: int = 1):
        self.kinetic = kinetic or QuadraticKinetic()
        self.coupling = coupling if coupling is not None else ZeroCost(dim)
        self.dim = self.coupling.dim
        self.c0 = self.kinetic.c0
        self.depends_on_measure = self.coupling.depends_on_measure
        self.C0 = self.coupling.L0
        self.third_order_bounded = np.isfinite(self.coupling.L0)

    def lipschitz_envelope(self, R):
        return max(self.coupling.L0, self.coupling.L1) + self.kinetic.c0 * (R + 1.0)

    def _xp(self, x, p):
        x = points(x, self.dim)
        p = np.broadcast_to(points(p, self.dim), x.shape)
        return x, p

    def value(self, x, mu, p):
        x, p = self._xp(x, p)
        return self.kinetic.value(p) - self.coupling.value(x, mu)

    def dx(self, x, mu, p):
        x, _ = self._xp(x, p)
        return -self.coupling.dx(x, mu)

    def dp(self, x, mu, p):
        _, p = self._xp(x, p)
        return self.kinetic.grad(p)

    def dxx(self, x, mu, p):
        x, _ = self._xp(x, p)
        return -self.coupling.dxx(x, mu)

    def dxp(self, x, mu, p):
        x, _ = self._xp(x, p)
        return np.zeros((x.shape[0], self.dim, self.dim))

    def dpp(self, x, mu, p):
        _, p = self._xp(x, p)
        return self.kinetic.hess(np.ascontiguousarray(p))

    def dmu(self, x, mu, xt, p):
        return -self.coupling.dmu(x, mu, xt)

    def dxmu(self, x, mu, xt, p):
        return -self.coupling.dxmu(x, mu, xt)

    def dpmu(self, x, mu, xt, p):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.zeros((n, m, self.dim, self.dim))

    def params(self):
        return {"name": "separable", "kinetic": self.kinetic.params(),
                "coupling": self.coupling.params()}


def lq_hamiltonian(q: float = 1.0, c: float = 0.5) -> SeparableHamiltonian:
    """H = |p|^2/2 - (q/2) x^2 - c x m(mu)."""
    return SeparableHamiltonian(QuadraticKinetic(1.0), QuadraticMeanCost(q, c, dim=1))


def free_hamiltonian(dim: int = 1) -> SeparableHamiltonian:
    return SeparableHamiltonian(QuadraticKinetic(1.0), ZeroCost(dim))


# --------------------------------------------------------------------------
# compactly supported perturbation H0 and the constructed family
# --------------------------------------------------------------------------


def _bump(x, R, hessian=True):
    """chi(x) = (1 - |x|^2/R^2)^4 on |x| < R, with gradient and Hessian."""
    n, d = x.shape
    s = np.sum(x**2, axis=1) / R**2
    inside = s < 1.0
    one = np.where(inside, 1.0 - s, 0.0)
    chi = one**4
    b1 = -4.0 * one**3
    b2 = 12.0 * one**2
    ds = 2.0 * x / R**2
    grad = b1[:, None] * ds
    if not hessian:
        return chi, grad, None
    hess = b2[:, None, None] * ds[:, :, None] * ds[:, None, :]
    idx = np.arange(d)
    hess[:, idx, idx] += (b1 * 2.0 / R**2)[:, None]
    return chi, grad, hess


def _bump_bounds(R):
    """Sup of chi, |grad chi|, |hess chi| and of rho |grad chi| + chi (radial scan)."""
    rho = np.linspace(0.0, R, 200001)
    s = (rho / R) ** 2
    one = 1.0 - s
    chi = one**4
    g = 4.0 * one**3 * 2.0 * rho / R**2
    tang = np.abs(-4.0 * one**3 * 2.0 / R**2)
    rad = np.abs(12.0 * one**2 * (2.0 * rho / R**2) ** 2 - 4.0 * one**3 * 2.0 / R**2)
    pad = 1.0 + 1e-6
    return {
        "chi": 1.0,
        "grad": float(g.max()) * pad,
        "hess": float(max(tang.max(), rad.max())) * pad,
        "grad_f_unit": float((g * rho + chi).max()) * pad,
    }


class BumpCouplingH0(HamiltonianModel):
    """H0 = chi(x) [alpha sin(r) + gamma sin(v.p + r)], r = int chi(y) <k, y> mu(dy).

    Vanishes for |x| > R0 and its measure derivative vanishes for |y| > R0.
    Not convex in p by itself; it is a perturbation fed to
    :func:`build_example_hamiltonian`.
    """

    def __init__(self, R0=2.0, alpha=0.4, gamma=0.4, v=1.0, k=1.0, dim: int = 1):
        self.dim = dim
        self.R0 = float(R0)
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.v = np.broadcast_to(np.asarray(v, dtype=float), (dim,)).copy()
        self.k = np.broadcast_to(np.asarray(k, dtype=float), (dim,)).copy()
        b = _bump_bounds(self.R0)
        amp = abs(self.alpha) + abs(self.gamma)
        grad_f = np.linalg.norm(self.k) * b["grad_f_unit"]
        vn = np.linalg.norm(self.v)
        self.bounds = {
            "dxmu": b["grad"] * grad_f * amp,
            "dxx": b["hess"] * amp,
            "dpmu": abs(self.gamma) * vn * grad_f,
            "dx": b["grad"] * amp,
        }
        self.derivative_bound = max(self.bounds["dxmu"], self.bounds["dxx"], self.bounds["dpmu"])
        # lower bound on lambda_min(dpp H0)
        self.pp_lower = -abs(self.gamma) * vn**2

    def _f(self, y):
        chi, grad, _ = _bump(y, self.R0, hessian=False)
        proj = y @ self.k
        return chi * proj, grad * proj[:, None] + chi[:, None] * self.k[None, :]

    def _stat(self, mu):
        # measures are immutable, so the last one seen can be remembered
        cached = getattr(self, "_last_stat", None)
        if cached is not None and cached[0] is mu:
            return cached[1]
        f, _ = self._f(mu.atoms)
        r = float(mu.weights @ f)
        self._last_stat = (mu, r)
        return r

    def _parts(self, x, mu, p, hessian=False):
        x = points(x, self.dim)
        p = np.broadcast_to(points(p, self.dim), x.shape)
        r = self._stat(mu)
        theta = p @ self.v + r
        chi, gchi, hchi = _bump(x, self.R0, hessian)
        return x, p, r, theta, chi, gchi, hchi

    def value(self, x, mu, p):
        _, _, r, th, chi, _, _ = self._parts(x, mu, p)
        return chi * (self.alpha * np.sin(r) + self.gamma * np.sin(th))

    def dx(self, x, mu, p):
        _, _, r, th, _, gchi, _ = self._parts(x, mu, p)
        S = self.alpha * np.sin(r) + self.gamma * np.sin(th)
        return gchi * S[:, None]

    def dp(self, x, mu, p):
        _, _, _, th, chi, _, _ = self._parts(x, mu, p)
        return (chi * self.gamma * np.cos(th))[:, None] * self.v[None, :]

    def dxx(self, x, mu, p):
        _, _, r, th, _, _, hchi = self._parts(x, mu, p, hessian=True)
        S = self.alpha * np.sin(r) + self.gamma * np.sin(th)
        return hchi * S[:, None, None]

    def dxp(self, x, mu, p):
        _, _, _, th, _, gchi, _ = self._parts(x, mu, p)
        sp = (self.gamma * np.cos(th))[:, None] * self.v[None, :]
        return gchi[:, :, None] * sp[:, None, :]

    def dpp(self, x, mu, p):
        _, _, _, th, chi, _, _ = self._parts(x, mu, p)
        c = -chi * self.gamma * np.sin(th)
        return c[:, None, None] * np.outer(self.v, self.v)[None]

    def dmu(self, x, mu, xt, p):
        _, _, r, th, chi, _, _ = self._parts(x, mu, p)
        Sr = self.alpha * np.cos(r) + self.gamma * np.cos(th)
        _, gf = self._f(points(xt, self.dim))
        return (chi * Sr)[:, None, None] * gf[None, :, :]

    def dxmu(self, x, mu, xt, p):
        _, _, r, th, _, gchi, _ = self._parts(x, mu, p)
        Sr = self.alpha * np.cos(r) + self.gamma * np.cos(th)
        _, gf = self._f(points(xt, self.dim))
        left = gchi * Sr[:, None]
        return left[:, None, :, None] * gf[None, :, None, :]

    def dpmu(self, x, mu, xt, p):
        _, _, _, th, chi, _, _ = self._parts(x, mu, p)
        c = -chi * self.gamma * np.sin(th)
        _, gf = self._f(points(xt, self.dim))
        left = c[:, None] * self.v[None, :]
        return left[:, None, :, None] * gf[None, :, None, :]

    def params(self):
        return {"name": "bump", "R0": self.R0, "alpha": self.alpha, "gamma": self.gamma,
                "v": self.v.tolist(), "k": self.k.tolist(), "dim": self.dim}


class ZeroH0(HamiltonianModel):
    depends_on_measure = False

    def __init__(self, R0: float = 1.0, dim: int = 1):
        self.R0 = float(R0)
        self.dim = dim
        self.derivative_bound = 0.0
        self.pp_lower = 0.0
        self.bounds = {"dxmu": 0.0, "dxx": 0.0, "dpmu": 0.0, "dx": 0.0}

    def _n(self, x):
        return points(x, self.dim).shape[0]

    def value(self, x, mu, p):
        return np.zeros(self._n(x))

    def dx(self, x, mu, p):
        return np.zeros((self._n(x), self.dim))

    dp = dx

    def dxx(self, x, mu, p):
        return np.zeros((self._n(x), self.dim, self.dim))

    dxp = dpp = dxx

    def dmu(self, x, mu, xt, p):
        return np.zeros((self._n(x), points(xt, self.dim).shape[0], self.dim))

    def dxmu(self, x, mu, xt, p):
        return np.zeros((self._n(x), points(xt, self.dim).shape[0], self.dim, self.dim))

    dpmu = dxmu

    def params(self):
        return {"name": "zero", "R0": self.R0, "dim": self.dim}


class RadialConvexExtension:
    """psi(x) = Psi(|x|): C0 |x|^2 inside R0, smooth blend on [R0, R0+1], linear after.

    On the blend Psi'' = 2 C0 (1 - S(s - R0)) with the quintic smoothstep
    S(u) = 10u^3 - 15u^4 + 6u^5, so Psi is C^4, convex and of slope
    2 C0 R0 + C0 beyond R0 + 1.
    """

    def __init__(self, C0: float, R0: float):
        self.C0 = float(C0)
        self.R0 = float(R0)
        self.slope = 2 * self.C0 * self.R0 + self.C0

    def radial(self, s):
        C, R = self.C0, self.R0
        u = np.clip(s - R, 0.0, 1.0)
        # S and its first two antiderivatives
        S0 = u**3 * (10 - 15 * u + 6 * u**2)
        S1 = u**4 * (2.5 - 3 * u + u**2)
        S2 = u**5 * (0.5 - 0.5 * u + u**2 / 7.0)
        p0 = C * R**2 + 2 * C * R * u + C * u**2 - 2 * C * S2
        p1 = 2 * C * R + 2 * C * (u - S1)
        p2 = 2 * C * (1.0 - S0)
        inner = s <= R
        outer = s > R + 1.0
        val = np.where(inner, C * s**2, p0)
        val = np.where(outer, C * R**2 + 2 * C * R + 5 * C / 7.0 + self.slope * (s - R - 1.0),
                       val)
        d1 = np.where(inner, 2 * C * s, np.where(outer, self.slope, p1))
        d2 = np.where(inner, 2 * C, np.where(outer, 0.0, p2))
        return val, d1, d2

    def value(self, x):
        return self.radial(np.linalg.norm(x, axis=1))[0]

    def grad(self, x):
        s = np.linalg.norm(x, axis=1)
        _, d1, _ = self.radial(s)
        safe = np.where(s > 0, s, 1.0)
        return np.where((s > 0)[:, None], x * (d1 / safe)[:, None], 0.0)

    def hess(self, x):
        n, d = x.shape
        s = np.linalg.norm(x, axis=1)
        _, d1, d2 = self.radial(s)
        safe = np.where(s > 0, s, 1.0)
        xh = x / safe[:, None]
        proj = xh[:, :, None] * xh[:, None, :]
        eye = np.eye(d)[None]
        ratio = np.where(s > self.R0, d1 / safe, 2 * self.C0)
        out = d2[:, None, None] * proj + ratio[:, None, None] * (eye - proj)
        out[s == 0] = 2 * self.C0 * np.eye(d)
        return out


class ConstructedHamiltonian(HamiltonianModel):
    """H = H0 + C0 |p|^2 - psi(x)."""

    def __init__(self, h0: HamiltonianModel, C0_large: float):
        self.h0 = h0
        self.C0_large = float(C0_large)
        self.dim = h0.dim
        self.psi = RadialConvexExtension(self.C0_large, h0.R0)
        self.depends_on_measure = h0.depends_on_measure
        self.c0 = 2 * self.C0_large + h0.pp_lower
        self.C0 = h0.bounds["dx"] + self.psi.slope

    def lipschitz_envelope(self, R):
        b = self.h0.bounds
        gv = abs(getattr(self.h0, "gamma", 0.0)) * np.linalg.norm(getattr(self.h0, "v", [0.0]))
        return max(self.C0, gv + 2 * self.C0_large * R, b["dxx"] + 2 * self.C0_large,
                   b["dxmu"], b["dpmu"], gv * (1 + b["dx"]))

    def value(self, x, mu, p):
        x = points(x, self.dim)
        p = np.broadcast_to(points(p, self.dim), x.shape)
        return self.h0.value(x, mu, p) + self.C0_large * np.sum(p**2, axis=1) - self.psi.value(x)

    def dx(self, x, mu, p):
        x = points(x, self.dim)
        return self.h0.dx(x, mu, p) - self.psi.grad(x)

    def dp(self, x, mu, p):
        x = points(x, self.dim)
        p = np.broadcast_to(points(p, self.dim), x.shape)
        return self.h0.dp(x, mu, p) + 2 * self.C0_large * p

    def dxx(self, x, mu, p):
        x = points(x, self.dim)
        return self.h0.dxx(x, mu, p) - self.psi.hess(x)

    def dxp(self, x, mu, p):
        return self.h0.dxp(x, mu, p)

    def dpp(self, x, mu, p):
        x = points(x, self.dim)
        return self.h0.dpp(x, mu, p) + eye_stack(x.shape[0], self.dim, 2 * self.C0_large)

    def dmu(self, x, mu, xt, p):
        return self.h0.dmu(x, mu, xt, p)

    def dxmu(self, x, mu, xt, p):
        return self.h0.dxmu(x, mu, xt, p)

    def dpmu(self, x, mu, xt, p):
        return self.h0.dpmu(x, mu, xt, p)

    def params(self):
        return {"name": "constructed", "C0": self.C0_large, "h0": self.h0.params()}


def minimal_constant(h0: HamiltonianModel) -> float:
    """Smallest admissible C0 for the convexified family.

    Requires 2 C0 >= 3 C and 2 C0 + lambda_min(dpp H0) >= 1.  The Q term is
    at most C^2 / (4 (2 C0 + pp_lower)) times (E|eta|)^2, which is below
    C (E|eta|)^2 only for C <= 4, so in general we also ask
    (y - 2C)(y + pp_lower) >= C^2 / 4 with y = 2 C0.
    """
    C = h0.derivative_bound
    pl = h0.pp_lower
    b = pl - 2 * C
    y_q = 0.5 * (-b + np.sqrt(b * b + 4 * (2 * C * pl + 0.25 * C * C)))
    return max(1.5 * C, 0.5 * (1.0 - pl), 0.5 * y_q)


def build_example_hamiltonian(h0: HamiltonianModel, C0_large: float) -> ConstructedHamiltonian:
    """Convexify a compactly supported H0 into a displacement monotone Hamiltonian."""
    if not hasattr(h0, "R0"):
        raise ValueError("h0 must declare its support radius R0")
    C = h0.derivative_bound
    need = minimal_constant(h0)
    strict_ok = 2 * C0_large > 3 * C or C == 0.0
    if not strict_ok or C0_large < need:
        raise ThresholdError(
            f"C0 = {C0_large:g} is below the admissible threshold {need:g} (C = {C:g})",
            minimal=need,
        )
    logger.debug("constructed Hamiltonian with C0=%g (threshold %g)", C0_large, need)
    return ConstructedHamiltonian(h0, C0_large)


def default_constructed(C0_large: float | None = None, **h0_kwargs) -> ConstructedHamiltonian:
    h0 = BumpCouplingH0(**h0_kwargs)
    if C0_large is None:
        C0_large = 1.25 * minimal_constant(h0) + 0.1
    return build_example_hamiltonian(h0, C0_large)


class ConstructedTerminalCost(QuadraticMeanCost):
    """Terminal cost paired with the constructed family: x^2/2 + kappa x m(mu)."""

    def __init__(self, g: float = 1.0, kappa: float = 0.5, dim: int = 1):
        super().__init__(g, kappa, dim)
