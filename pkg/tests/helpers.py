"""Finite-difference oracles shared by the test modules (1-d models)."""

from __future__ import annotations

import numpy as np

from mfgmaster.hamiltonian import fd_lions_derivative

STEP = 1e-4


def central(f, z, h=STEP):
    return (f(z + h) - f(z - h)) / (2 * h)


def rel_err(a, b, floor=1e-3):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


def h_fd_errors(h, x, mu, p):
    """Largest relative gap between each analytic derivative of H and its
    finite-difference counterpart, at 1-d points x, p (arrays of length n)."""
    x = np.asarray(x, float)[:, None]
    p = np.asarray(p, float)[:, None]
    xt = mu.atoms
    out = {
        "dx": rel_err(h.dx(x, mu, p), central(lambda z: h.value(z, mu, p)[:, None], x)),
        "dp": rel_err(h.dp(x, mu, p), central(lambda z: h.value(x, mu, z)[:, None], p)),
        "dxx": rel_err(h.dxx(x, mu, p)[:, :, 0], central(lambda z: h.dx(z, mu, p), x)),
        "dxp": rel_err(h.dxp(x, mu, p)[:, :, 0], central(lambda z: h.dp(z, mu, p), x)),
        "dpp": rel_err(h.dpp(x, mu, p)[:, :, 0], central(lambda z: h.dp(x, mu, z), p)),
        "dxmu": rel_err(h.dxmu(x, mu, xt, p)[..., 0],
                        central(lambda z: h.dmu(z, mu, xt, p), x)),
        "dpmu": rel_err(h.dpmu(x, mu, xt, p)[..., 0],
                        central(lambda z: h.dmu(x, mu, xt, z), p)),
    }
    k = len(xt) // 2
    fd = np.array([fd_lions_derivative(lambda nu, i=i: float(h.value(x[i:i + 1], nu,
                                                                     p[i:i + 1])[0]),
                                       mu, k, eps=1e-3) for i in range(len(x))])
    out["dmu"] = rel_err(h.dmu(x, mu, xt, p)[:, k, :], fd)
    return out


def g_fd_errors(g, x, mu):
    x = np.asarray(x, float)[:, None]
    xt = mu.atoms
    out = {
        "dx": rel_err(g.dx(x, mu), central(lambda z: g.value(z, mu)[:, None], x)),
        "dxx": rel_err(g.dxx(x, mu)[:, :, 0], central(lambda z: g.dx(z, mu), x)),
        "dxmu": rel_err(g.dxmu(x, mu, xt)[..., 0],
                        central(lambda z: g.dmu(z, mu, xt), x)),
    }
    k = len(xt) // 2
    fd = np.array([fd_lions_derivative(lambda nu, i=i: float(g.value(x[i:i + 1], nu)[0]),
                                       mu, k, eps=1e-3) for i in range(len(x))])
    out["dmu"] = rel_err(g.dmu(x, mu, xt)[:, k, :], fd)
    return out
