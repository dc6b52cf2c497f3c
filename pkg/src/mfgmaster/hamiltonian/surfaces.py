"""Shipped surfaces U(x, mu): terminal costs and separable couplings.

Every measure dependence goes through an integral statistic of the cloud,
so Lions derivatives are closed form.
"""

from __future__ import annotations

import numpy as np

from ..measures import DiscreteMeasure
from .base import TerminalCostModel, eye_stack, points


class ZeroCost(TerminalCostModel):
    depends_on_measure = False
    L0 = L1 = L2 = 0.0

    def __init__(self, dim: int = 1):
        self.dim = dim

    def value(self, x, mu):
        return np.zeros(points(x, self.dim).shape[0])

    def dx(self, x, mu):
        return np.zeros_like(points(x, self.dim))

    def dxx(self, x, mu):
        n = points(x, self.dim).shape[0]
        return np.zeros((n, self.dim, self.dim))

    def dmu(self, x, mu, xt):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.zeros((n, m, self.dim))

    def dxmu(self, x, mu, xt):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.zeros((n, m, self.dim, self.dim))

    def params(self):
        return {"name": "zero", "dim": self.dim}


class QuadraticMeanCost(TerminalCostModel):
    """U = (g/2)|x|^2 + kappa <x, m(mu)>."""

    def __init__(self, g: float = 1.0, kappa: float = 0.0, dim: int = 1):
        self.g = float(g)
        self.kappa = float(kappa)
        self.dim = dim
        self.depends_on_measure = self.kappa != 0.0
        if not self.depends_on_measure:
            self.L1 = self.L2 = 0.0

    def value(self, x, mu):
        x = points(x, self.dim)
        return 0.5 * self.g * np.sum(x**2, axis=1) + self.kappa * x @ mu.mean()

    def dx(self, x, mu):
        x = points(x, self.dim)
        return self.g * x + self.kappa * mu.mean()[None, :]

    def dxx(self, x, mu):
        return eye_stack(points(x, self.dim).shape[0], self.dim, self.g)

    def dmu(self, x, mu, xt):
        x = points(x, self.dim)
        m = points(xt, self.dim).shape[0]
        return np.broadcast_to(self.kappa * x[:, None, :], (x.shape[0], m, self.dim)).copy()

    def dxmu(self, x, mu, xt):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        out = np.zeros((n, m, self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, :, idx, idx] = self.kappa
        return out

    def params(self):
        return {"name": "quadratic_mean", "g": self.g, "kappa": self.kappa, "dim": self.dim}


class InteractionCost(TerminalCostModel):
    """Gaussian pair interaction U = int W(x - y) mu(dy), W(z) = lam exp(-|z|^2 / 2 s^2)."""

    def __init__(self, strength: float = 1.0, width: float = 1.0, dim: int = 1):
        if width <= 0:
            raise ValueError("width must be positive")
        self.lam = float(strength)
        self.sigma = float(width)
        self.dim = dim
        a = abs(self.lam)
        self.L0 = max(a / (self.sigma * np.sqrt(np.e)), a / self.sigma**2)
        self.L1 = self.L0
        self.L2 = self.L1

    def _kernel(self, x, y):
        z = x[:, None, :] - y[None, :, :]
        w = self.lam * np.exp(-np.sum(z**2, axis=2) / (2 * self.sigma**2))
        return z, w

    def _grad_w(self, z, w):
        return -w[..., None] * z / self.sigma**2

    def _hess_w(self, z, w):
        s2 = self.sigma**2
        outer = z[..., :, None] * z[..., None, :] / s2**2
        eye = np.eye(self.dim) / s2
        return w[..., None, None] * (outer - eye)

    def value(self, x, mu):
        x = points(x, self.dim)
        _, w = self._kernel(x, mu.atoms)
        return w @ mu.weights

    def dx(self, x, mu):
        x = points(x, self.dim)
        z, w = self._kernel(x, mu.atoms)
        return np.einsum("nmd,m->nd", self._grad_w(z, w), mu.weights)

    def dxx(self, x, mu):
        x = points(x, self.dim)
        z, w = self._kernel(x, mu.atoms)
        return np.einsum("nmij,m->nij", self._hess_w(z, w), mu.weights)

    def dmu(self, x, mu, xt):
        z, w = self._kernel(points(x, self.dim), points(xt, self.dim))
        return -self._grad_w(z, w)

    def dxmu(self, x, mu, xt):
        z, w = self._kernel(points(x, self.dim), points(xt, self.dim))
        return -self._hess_w(z, w)

    def params(self):
        return {"name": "interaction", "strength": self.lam, "width": self.sigma, "dim": self.dim}


class ProductCost(TerminalCostModel):
    """U = A sin(<omega, x>) tanh(r), r = int cos(<nu, y>) mu(dy)."""

    def __init__(self, amplitude: float = 1.0, omega=1.0, nu=1.0, dim: int = 1):
        self.dim = dim
        self.amp = float(amplitude)
        self.omega = np.broadcast_to(np.asarray(omega, dtype=float), (dim,)).copy()
        self.nu = np.broadcast_to(np.asarray(nu, dtype=float), (dim,)).copy()
        wn, nn = np.linalg.norm(self.omega), np.linalg.norm(self.nu)
        a = abs(self.amp)
        self.L0 = a * max(wn, wn**2)
        self.L1 = a * max(nn, wn * nn)
        self.L2 = self.L1

    def _stat(self, mu):
        return float(mu.weights @ np.cos(mu.atoms @ self.nu))

    def value(self, x, mu):
        x = points(x, self.dim)
        return self.amp * np.sin(x @ self.omega) * np.tanh(self._stat(mu))

    def dx(self, x, mu):
        x = points(x, self.dim)
        c = self.amp * np.cos(x @ self.omega) * np.tanh(self._stat(mu))
        return c[:, None] * self.omega[None, :]

    def dxx(self, x, mu):
        x = points(x, self.dim)
        c = -self.amp * np.sin(x @ self.omega) * np.tanh(self._stat(mu))
        return c[:, None, None] * np.outer(self.omega, self.omega)[None]

    def _grad_f(self, xt):
        return -np.sin(xt @ self.nu)[:, None] * self.nu[None, :]

    def dmu(self, x, mu, xt):
        x, xt = points(x, self.dim), points(xt, self.dim)
        sech2 = 1.0 / np.cosh(self._stat(mu)) ** 2
        left = self.amp * np.sin(x @ self.omega) * sech2
        return left[:, None, None] * self._grad_f(xt)[None, :, :]

    def dxmu(self, x, mu, xt):
        x, xt = points(x, self.dim), points(xt, self.dim)
        sech2 = 1.0 / np.cosh(self._stat(mu)) ** 2
        left = self.amp * np.cos(x @ self.omega) * sech2
        gf = self._grad_f(xt)
        return left[:, None, None, None] * self.omega[None, None, :, None] * gf[None, :, None, :]

    def params(self):
        return {"name": "product", "amplitude": self.amp, "omega": self.omega.tolist(),
                "nu": self.nu.tolist(), "dim": self.dim}


class SplitSurface(TerminalCostModel):
    """Separable U = (curvature/2)|x|^2 + lam |m(mu)|^2, so dxmu vanishes."""

    def __init__(self, curvature: float = -1.0, mean_weight: float = 0.0, dim: int = 1):
        self.curvature = float(curvature)
        self.lam = float(mean_weight)
        self.dim = dim
        self.depends_on_measure = self.lam != 0.0

    def value(self, x, mu):
        x = points(x, self.dim)
        m = mu.mean()
        return 0.5 * self.curvature * np.sum(x**2, axis=1) + self.lam * float(m @ m)

    def dx(self, x, mu):
        return self.curvature * points(x, self.dim)

    def dxx(self, x, mu):
        return eye_stack(points(x, self.dim).shape[0], self.dim, self.curvature)

    def dmu(self, x, mu, xt):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.broadcast_to(2 * self.lam * mu.mean(), (n, m, self.dim)).copy()

    def dxmu(self, x, mu, xt):
        n, m = points(x, self.dim).shape[0], points(xt, self.dim).shape[0]
        return np.zeros((n, m, self.dim, self.dim))

    def params(self):
        return {"name": "split", "curvature": self.curvature, "mean_weight": self.lam,
                "dim": self.dim}


class ConvexifiedSurface(TerminalCostModel):
    """U + C|x|^2; displacement monotone once C dominates |dxx U| and |dxmu U|."""

    def __init__(self, base: TerminalCostModel, C: float):
        self.base = base
        self.C = float(C)
        self.dim = base.dim
        self.depends_on_measure = base.depends_on_measure
        self.L1 = base.L1
        self.L2 = base.L2

    @classmethod
    def dominating(cls, base: TerminalCostModel) -> ConvexifiedSurface:
        return cls(base, max(base.L0, base.L1))

    def value(self, x, mu):
        x = points(x, self.dim)
        return self.base.value(x, mu) + self.C * np.sum(x**2, axis=1)

    def dx(self, x, mu):
        x = points(x, self.dim)
        return self.base.dx(x, mu) + 2 * self.C * x

    def dxx(self, x, mu):
        x = points(x, self.dim)
        return self.base.dxx(x, mu) + eye_stack(x.shape[0], self.dim, 2 * self.C)

    def dmu(self, x, mu, xt):
        return self.base.dmu(x, mu, xt)

    def dxmu(self, x, mu, xt):
        return self.base.dxmu(x, mu, xt)

    def params(self):
        return {"name": "convexified", "C": self.C, "base": self.base.params()}


def surface_values_on(surface: TerminalCostModel, mu: DiscreteMeasure):
    """(dxx at atoms, dxmu between atoms) as used by the bilinear forms."""
    return surface.dxx(mu.atoms, mu), surface.dxmu(mu.atoms, mu, mu.atoms)
