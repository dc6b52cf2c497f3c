"""Figures for the CLI reports.  Everything renders off-screen to files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return str(path)


def plot_solution(sol, path):
    """Heat maps of u and rho over (t, x)."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2), sharey=True)
        t, x = sol.grid.times, sol.grid.nodes
        for ax, field, name in zip(axes, (sol.u, sol.rho), ("u", "rho")):
            mesh = ax.pcolormesh(x, t, field, shading="auto", cmap="viridis")
            fig.colorbar(mesh, ax=ax)
            ax.set_xlabel("x")
            ax.set_title(name)
        axes[0].set_ylabel("t")
        return _save(fig, path)


def plot_curves(x, curves: dict, path, xlabel="x", ylabel="", title=None, logy=False,
                markers=False):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, y in curves.items():
            style = {"marker": "o", "markersize": 3} if markers else {}
            ax.plot(x, y, label=label, **style)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logy:
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        if len(curves) > 1:
            ax.legend()
        return _save(fig, path)


def plot_profile(profile, path, oracle=None):
    curves = {"I + Ibar": profile.values}
    if profile.rate_bound is not None:
        curves["E displ H"] = profile.rate_bound
    if oracle is not None:
        curves["closed form"] = oracle
    return plot_curves(profile.times, curves, path, xlabel="t", ylabel="form value",
                       title="dissipation profile", markers=True)


def plot_lipschitz(report, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = np.asarray(report.scales)
        ax.semilogx(s, report.ratio_at_shrinking_steps, "o-", label="V")
        ax.semilogx(s, report.dx_ratio_at_shrinking_steps, "s--", label="d_x V")
        ax.set_xlabel("jitter scale")
        ax.set_ylabel(f"max ratio / {report.metric}")
        ax.invert_xaxis()
        ax.legend()
        return _save(fig, path)


def plot_coefficients(coeffs, path):
    return plot_curves(coeffs.t, {"a": coeffs.a, "b": coeffs.b, "c": coeffs.c, "m": coeffs.m,
                                  "d_m b": coeffs.dm_b, "d_m c": coeffs.dm_c},
                       path, xlabel="t", title="Riccati coefficients")
