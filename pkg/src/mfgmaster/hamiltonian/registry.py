"""Name -> model factories used by the CLI configuration."""

from __future__ import annotations

from .base import HamiltonianModel, TerminalCostModel
from .models import (BumpCouplingH0, ConstructedTerminalCost, LogCoshKinetic, QuadraticKinetic,
                     SeparableHamiltonian, ZeroH0, build_example_hamiltonian, lq_hamiltonian,
                     minimal_constant)
from .surfaces import (ConvexifiedSurface, InteractionCost, ProductCost, QuadraticMeanCost,
                       SplitSurface, ZeroCost)

SURFACES = {
    "zero": ZeroCost,
    "quadratic_mean": QuadraticMeanCost,
    "interaction": InteractionCost,
    "product": ProductCost,
    "split": SplitSurface,
}

KINETICS = {"quadratic": QuadraticKinetic, "logcosh": LogCoshKinetic}


def make_surface(spec: dict) -> TerminalCostModel:
    spec = dict(spec)
    name = spec.pop("name")
    if name == "convexified":
        base = make_surface(spec.pop("base"))
        C = spec.pop("C", None)
        return ConvexifiedSurface.dominating(base) if C is None else ConvexifiedSurface(base, C)
    try:
        cls = SURFACES[name]
    except KeyError:
        raise ValueError(f"unknown surface {name!r}; choose from {sorted(SURFACES)}") from None
    return cls(**spec)


def _lq(params):
    q = params.get("q", 1.0)
    c = params.get("c", 0.5)
    g = params.get("g", 1.0)
    return lq_hamiltonian(q, c), QuadraticMeanCost(g, 0.0, dim=1)


def _constructed(params):
    params = dict(params)
    C0 = params.pop("C0", None)
    g = params.pop("g", 1.0)
    kappa = params.pop("kappa", 0.5)
    zero = params.pop("zero_h0", False)
    if zero:
        h0 = ZeroH0(params.get("R0", 1.0), params.get("dim", 1))
    else:
        h0 = BumpCouplingH0(**params)
    if C0 is None:
        C0 = 1.25 * minimal_constant(h0) + 0.1
    return build_example_hamiltonian(h0, C0), ConstructedTerminalCost(g, kappa, h0.dim)


def _separable(params):
    kin = dict(params.get("kinetic", {"name": "quadratic"}))
    kin_cls = KINETICS[kin.pop("name")]
    coupling = make_surface(params.get("coupling", {"name": "zero"}))
    terminal = make_surface(params.get("terminal", {"name": "zero", "dim": coupling.dim}))
    return SeparableHamiltonian(kin_cls(**kin), coupling), terminal


MODELS = {"lq": _lq, "constructed": _constructed, "separable": _separable}


def make_model(name: str, params: dict | None = None) -> tuple[HamiltonianModel, TerminalCostModel]:
    """Build (H, G) from a registry name and parameter map."""
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(params or {})
