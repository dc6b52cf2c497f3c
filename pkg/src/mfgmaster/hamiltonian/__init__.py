"""Hamiltonians, terminal costs, Lagrangians and finite-difference oracles."""

from .base import HamiltonianModel, TerminalCostModel
from .lagrangian import (LagrangianModel, LegendreLagrangian, SeparableLagrangian,
                         lagrangian_hat, lagrangian_of, legendre_batch, legendre_lagrangian,
                         identity_residuals, optimal_control)
from .lions import fd_lions_derivative, richardson_derivatives
from .models import (BumpCouplingH0, ConstructedHamiltonian, ConstructedTerminalCost,
                     LogCoshKinetic, QuadraticKinetic, RadialConvexExtension,
                     SeparableHamiltonian, ZeroH0, build_example_hamiltonian,
                     default_constructed, free_hamiltonian, lq_hamiltonian, minimal_constant)
from .registry import make_model, make_surface
from .surfaces import (ConvexifiedSurface, InteractionCost, ProductCost, QuadraticMeanCost,
                       SplitSurface, ZeroCost)

__all__ = [
    "HamiltonianModel", "TerminalCostModel", "LagrangianModel", "LegendreLagrangian",
    "SeparableLagrangian", "lagrangian_hat", "lagrangian_of", "legendre_batch",
    "legendre_lagrangian", "optimal_control", "identity_residuals", "fd_lions_derivative",
    "richardson_derivatives",
    "BumpCouplingH0", "ConstructedHamiltonian", "ConstructedTerminalCost", "LogCoshKinetic",
    "QuadraticKinetic", "RadialConvexExtension", "SeparableHamiltonian", "ZeroH0",
    "build_example_hamiltonian", "default_constructed", "free_hamiltonian", "lq_hamiltonian",
    "minimal_constant", "make_model", "make_surface", "ConvexifiedSurface", "InteractionCost",
    "ProductCost", "QuadraticMeanCost", "SplitSurface", "ZeroCost",
]
