from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from mfgmaster import RiccatiBlowUp, TangentSample, sample_gaussian
from mfgmaster.hamiltonian import QuadraticMeanCost, lq_hamiltonian
from mfgmaster.lq_oracle import (LqSpec, oracle_dmuV, oracle_dxV, oracle_flow, oracle_V,
                                 solve_lq, variation_moments, variation_profile)
from mfgmaster.mfg_solver import Grid1D, deposit, hjb_residual
from mfgmaster.monotonicity import displacement_form_surface

# d b(t0)/d m0 for the default benchmark (q=1, c=1/2, g=1, T=1), from the
# shooting map; matches an independent adaptive integration of the
# sensitivity Riccati equation below.
SHOOT_SENSITIVITY = 0.2035654600790748


@pytest.fixture(scope="module")
def default_co():
    return solve_lq(LqSpec())


def test_terminal_conditions(default_co):
    co = default_co
    assert co.a[-1] == 1.0 and co.c[-1] == 0.0
    assert abs(co.b[-1]) < 1e-12
    x = np.linspace(-3, 3, 13)
    assert np.allclose(oracle_V(co, 1.0, x), 0.5 * x**2, rtol=0, atol=1e-12)


def test_stationary_riccati():
    co = solve_lq(LqSpec(q=1.0, g=1.0))
    assert np.max(np.abs(co.a - 1.0)) < 1e-12


def test_zero_curvature_closed_form():
    co = solve_lq(LqSpec(q=0.0, g=1.0, T=1.0))
    assert np.max(np.abs(co.a - 1.0 / (1.0 + 1.0 - co.t))) < 1e-10


def test_decoupled_mean():
    co = solve_lq(LqSpec(c=0.0))
    assert np.max(np.abs(co.b)) < 1e-12
    assert np.max(np.abs(co.dm_b)) == 0.0
    assert np.max(np.abs(co.dm_c)) == 0.0


def test_trivial_value():
    co = solve_lq(LqSpec(q=0.0, c=0.0, g=0.0))
    assert np.max(np.abs(oracle_V(co, co.t[:, None], np.linspace(-3, 3, 7)))) == 0.0


def test_frozen_sensitivity(default_co):
    co = default_co
    assert co.shoot_sensitivity == pytest.approx(SHOOT_SENSITIVITY, abs=1e-12)
    assert co.beta[0] == pytest.approx(SHOOT_SENSITIVITY, abs=1e-10)


def test_sensitivity_against_adaptive_integration():
    # a = 1 here, so beta' = 2 beta + beta^2 - c backward from beta(T) = 0
    sol = solve_ivp(lambda t, b: 2 * b + b * b - 0.5, (1.0, 0.0), [0.0], rtol=1e-13,
                    atol=1e-14)
    assert sol.y[0, -1] == pytest.approx(SHOOT_SENSITIVITY, abs=1e-10)


def test_mean_equation_residual():
    co = solve_lq(LqSpec(q=0.5, c=0.7, g=2.0, m0=-0.3))
    # Simpson over pairs of steps: m(t+2h) - m(t) = int -(a m + b)
    f = -(co.a * co.m + co.b)
    h = co.t[1] - co.t[0]
    simpson = h / 3 * (f[:-2:2] + 4 * f[1:-1:2] + f[2::2])
    assert np.max(np.abs(co.m[2::2] - co.m[:-2:2] - simpson)) < 1e-10


def test_oracle_flow_rebases_on_cloud_mean():
    co = solve_lq(LqSpec(m0=1.0))
    mu = sample_gaussian(40, 0.2, 0.5, seed=1)
    t, m = oracle_flow(co, mu)
    assert m[0] == pytest.approx(float(mu.mean()[0]))


def test_measure_derivative_is_affine_in_x(default_co):
    co = default_co
    x = np.linspace(-2, 2, 5)
    d = oracle_dmuV(co, 0.3, x)
    assert np.allclose(np.diff(d) / np.diff(x), co.at("beta", 0.3))
    assert np.allclose(oracle_dxV(co, 0.3, x), co.at("a", 0.3) * x + co.at("b", 0.3))


def test_riccati_blowup():
    with pytest.raises(RiccatiBlowUp):
        solve_lq(LqSpec(q=-50.0, g=0.0, T=5.0))


def test_spec_validation():
    with pytest.raises(ValueError):
        LqSpec(g=-1.0)
    with pytest.raises(ValueError):
        solve_lq(LqSpec(), ode_steps=10)
    assert LqSpec(q=1.0, c=-1.0).monotone and not LqSpec(q=1.0, c=-2.0).monotone


@given(st.integers(0, 10_000), st.floats(0, 3), st.floats(-3, 3))
def test_coupling_form_closed_form(seed, q, c):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 15))
    mu = sample_gaussian(n, 0.0, 1.0, seed=seed)
    eta = rng.standard_normal(n)
    s = TangentSample(mu, eta)
    hand = q * float(mu.weights @ eta**2) + c * float(mu.weights @ eta) ** 2
    assert displacement_form_surface(QuadraticMeanCost(q, c), s) == pytest.approx(hand, abs=1e-12)


def test_quadratic_ansatz_residual_refines():
    # q = 0 keeps a_t time dependent, so the residual is not identically zero
    co = solve_lq(LqSpec(q=0.0, c=0.0, g=1.0))
    h = lq_hamiltonian(0.0, 0.0)
    mu = sample_gaussian(10, 0.0, 0.5, seed=0)
    errs = []
    for nx, nt in ((40, 20), (80, 80)):
        grid = Grid1D(-4.0, 4.0, nx, 0.0, 1.0, nt)
        T, X = np.meshgrid(grid.times, grid.nodes, indexing="ij")
        rho = np.repeat(deposit(mu, grid)[0][None], nt + 1, axis=0)
        errs.append(np.max(np.abs(hjb_residual(h, oracle_V(co, T, X), rho, grid))))
    assert errs[1] < errs[0] / 3


def test_variation_profile_constant_tangent(default_co):
    co = default_co
    t = np.linspace(0, 1, 11)
    e, s2 = variation_moments(co, t, 1.0, 1.0)
    # a deterministic tangent stays deterministic: s2 = e^2
    assert np.allclose(s2, e**2, atol=1e-10)
    assert np.all(np.diff(variation_profile(co, t, s2, e)) < 0)
