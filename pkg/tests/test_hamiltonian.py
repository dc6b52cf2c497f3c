from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from helpers import g_fd_errors, h_fd_errors
from mfgmaster import DiscreteMeasure, ThresholdError, WeightFloorError, sample_gaussian
from mfgmaster.hamiltonian import (BumpCouplingH0, ConvexifiedSurface, InteractionCost,
                                   LegendreLagrangian, LogCoshKinetic, ProductCost,
                                   QuadraticMeanCost, SeparableHamiltonian, SplitSurface, ZeroH0,
                                   build_example_hamiltonian, default_constructed,
                                   fd_lions_derivative, free_hamiltonian, identity_residuals,
                                   lagrangian_hat, lagrangian_of, legendre_lagrangian,
                                   lq_hamiltonian, make_model, make_surface, minimal_constant,
                                   optimal_control)
from mfgmaster.hamiltonian.models import RadialConvexExtension

HAMILTONIANS = {
    "lq": lambda: lq_hamiltonian(1.0, 0.5),
    "constructed": default_constructed,
    "logcosh_interaction": lambda: SeparableHamiltonian(LogCoshKinetic(), InteractionCost()),
    "free": free_hamiltonian,
}
SURFACES = {
    "quadratic_mean": lambda: QuadraticMeanCost(1.0, 0.5),
    "interaction": InteractionCost,
    "product": ProductCost,
    "split": SplitSurface,
    "convexified": lambda: ConvexifiedSurface.dominating(InteractionCost()),
}


def random_point(seed, n=8):
    rng = np.random.default_rng(seed)
    mu = sample_gaussian(int(rng.integers(3, 12)), rng.uniform(-1, 1), rng.uniform(0.3, 1.5),
                         seed=seed)
    return mu, rng.uniform(-3, 3, n), rng.uniform(-2, 2, n)


# --------------------------------------------------------------------------
# analytic derivatives against finite differences
# --------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(HAMILTONIANS))
@given(seed=st.integers(0, 2**31))
def test_hamiltonian_derivatives_match_fd(name, seed):
    h = HAMILTONIANS[name]()
    mu, x, p = random_point(seed)
    errs = h_fd_errors(h, x, mu, p)
    assert max(errs.values()) < 1e-5, errs


@pytest.mark.parametrize("name", sorted(SURFACES))
@given(seed=st.integers(0, 2**31))
def test_surface_derivatives_match_fd(name, seed):
    g = SURFACES[name]()
    mu, x, _ = random_point(seed)
    errs = g_fd_errors(g, x, mu)
    assert max(errs.values()) < 1e-5, errs


@pytest.mark.parametrize("name", ["lq", "constructed", "logcosh_interaction"])
def test_lions_derivatives_on_100_pairs(name):
    h = HAMILTONIANS[name]()
    rng = np.random.default_rng(7)
    worst = 0.0
    for trial in range(100):
        mu, x, p = random_point(1000 + trial, n=1)
        k = int(rng.integers(mu.size))
        fd = fd_lions_derivative(lambda nu: float(h.value(x[:, None], nu, p[:, None])[0]),
                                 mu, k, eps=1e-3)
        exact = h.dmu(x[:, None], mu, mu.atoms, p[:, None])[0, k]
        worst = max(worst, float(np.abs(fd - exact).max() / max(abs(exact).max(), 1e-3)))
    assert worst < 1e-4


def test_dpp_and_growth_bounds():
    for name in ("lq", "constructed", "logcosh_interaction"):
        h = HAMILTONIANS[name]()
        for seed in range(20):
            mu, x, p = random_point(seed, n=20)
            dpp = h.dpp(x[:, None], mu, p[:, None])
            assert np.allclose(dpp, np.swapaxes(dpp, 1, 2))
            assert np.all(np.linalg.eigvalsh(dpp) >= h.c0 - 1e-12)
            dx = np.abs(h.dx(x[:, None], mu, p[:, None]))[:, 0]
            assert np.all(dx <= h.C0 * (1 + np.abs(p)) + 1e-12)


@pytest.mark.parametrize("name", ["interaction", "product", "convexified"])
def test_surface_lipschitz_bounds(name):
    g = SURFACES[name]()
    for seed in range(20):
        mu, x, _ = random_point(seed, n=20)
        assert np.all(np.abs(g.dx(x[:, None], mu)) <= g.L0 + 1e-12)
        assert np.all(np.abs(g.dmu(x[:, None], mu, mu.atoms)) <= g.L1 + 1e-12)
        assert g.L2 <= g.L1


# --------------------------------------------------------------------------
# Lions derivative oracle
# --------------------------------------------------------------------------


def test_fd_lions_linear_and_quadratic():
    mu = sample_gaussian(9, 0.5, 1.0, seed=3)
    for k in range(mu.size):
        d_mean = fd_lions_derivative(lambda nu: float(nu.mean()[0]), mu, k)
        assert d_mean == pytest.approx([1.0], abs=1e-10)
        d_m2 = fd_lions_derivative(lambda nu: nu.second_moment(), mu, k)
        assert d_m2 == pytest.approx(2 * mu.atoms[k], abs=1e-9)
        assert fd_lions_derivative(lambda nu: 3.0, mu, k) == pytest.approx([0.0])


def test_fd_lions_halving_is_stable():
    mu = sample_gaussian(5, seed=2)

    def cubic(nu):
        return float(nu.weights @ nu.atoms[:, 0] ** 3)

    a = fd_lions_derivative(cubic, mu, 1, eps=1e-2)
    b = fd_lions_derivative(cubic, mu, 1, eps=5e-3)
    assert a == pytest.approx(b, rel=1e-9)
    assert a == pytest.approx(3 * mu.atoms[1] ** 2, rel=1e-9)


def test_fd_lions_errors():
    mu = DiscreteMeasure([0.0, 1.0], [1 - 1e-13, 1e-13])
    with pytest.raises(WeightFloorError):
        fd_lions_derivative(lambda nu: 0.0, mu, 1)
    with pytest.raises(ValueError):
        fd_lions_derivative(lambda nu: 0.0, mu, 0, eps=0.0)


# --------------------------------------------------------------------------
# Legendre transform
# --------------------------------------------------------------------------


def test_legendre_of_half_square_matches_grid_brute_force():
    h = free_hamiltonian()
    mu = DiscreteMeasure.dirac(0.0)
    grid = np.arange(-10.0, 10.0 + 5e-4, 1e-3)
    for a in (-1.7, 0.3, 2.5):
        brute = np.max(-a * grid - 0.5 * grid**2)
        assert legendre_lagrangian(h, 0.0, mu, a) == pytest.approx(brute, abs=1e-6)
        assert legendre_lagrangian(h, 0.0, mu, a) == pytest.approx(0.5 * a * a, abs=1e-12)
    assert legendre_lagrangian(h, 0.0, mu, 0.0) == 0.0


@pytest.mark.parametrize("name", ["lq", "constructed", "logcosh_interaction"])
def test_double_legendre_recovers_h(name):
    h = HAMILTONIANS[name]()
    mu, x, p = random_point(11, n=4)
    for xi, pi in zip(x, p):
        a_star = float(optimal_control(h, [[xi]], mu, [[pi]])[0, 0])
        res = minimize_scalar(lambda a: pi * a + legendre_lagrangian(h, xi, mu, a),
                              bracket=(a_star - 0.5, a_star, a_star + 0.5), tol=1e-12)
        assert -res.fun == pytest.approx(float(h.value([[xi]], mu, [[pi]])[0]), abs=1e-8)


def test_lagrangian_hat_is_l_at_optimal_control():
    h = default_constructed()
    mu, x, p = random_point(5, n=6)
    hat = lagrangian_hat(h, x[:, None], mu, p[:, None])
    a = optimal_control(h, x[:, None], mu, p[:, None])
    direct = [legendre_lagrangian(h, xi, mu, ai) for xi, ai in zip(x, a[:, 0])]
    assert hat == pytest.approx(direct, abs=1e-9)


def test_legendre_requires_convexity():
    h = SeparableHamiltonian(coupling=InteractionCost())
    h.c0 = 0.0
    with pytest.raises(ValueError):
        legendre_lagrangian(h, 0.0, DiscreteMeasure.dirac(0.0), 1.0)


def test_lq_inverse_hessian_identity_is_exact():
    h = lq_hamiltonian(1.0, 0.5)
    mu, x, p = random_point(3, n=5)
    for xi, pi in zip(x, p):
        exact = identity_residuals(h, lagrangian_of(h), xi, mu, pi)
        assert exact["dpp"] == (0.0, 1.0)
        numeric = identity_residuals(h, LegendreLagrangian(h), xi, mu, pi)
        assert numeric["dpp"][0] < 1e-8


@pytest.mark.parametrize("name", ["lq", "constructed", "logcosh_interaction"])
def test_duality_identities(name):
    h = HAMILTONIANS[name]()
    lagr = LegendreLagrangian(h)
    mu, x, p = random_point(21, n=10)
    for xi, pi in zip(x, p):
        for key, (res, ref) in identity_residuals(h, lagr, xi, mu, pi).items():
            assert res <= 1e-6 * max(ref, 1.0), key


def test_lagrangian_of_picks_closed_form():
    assert type(lagrangian_of(lq_hamiltonian())).__name__ == "SeparableLagrangian"
    assert isinstance(lagrangian_of(default_constructed()), LegendreLagrangian)


# --------------------------------------------------------------------------
# convexified construction
# --------------------------------------------------------------------------


def test_zero_h0_construction():
    h = build_example_hamiltonian(ZeroH0(R0=1.0), 1.0)
    psi = RadialConvexExtension(1.0, 1.0)
    mu = DiscreteMeasure.dirac(0.0)
    x = np.linspace(-4, 4, 41)[:, None]
    p = np.linspace(-2, 2, 41)[:, None]
    assert h.value(x, mu, p) == pytest.approx(p[:, 0] ** 2 - psi.value(x))
    assert np.allclose(h.dpp(x, mu, p), 2.0)


def test_radial_extension_shape():
    psi = RadialConvexExtension(2.0, 1.5)
    s = np.linspace(0, 6, 601)
    val, d1, d2 = psi.radial(s)
    inside = s <= 1.5
    assert val[inside] == pytest.approx(2.0 * s[inside] ** 2)
    assert np.all(d2 >= 0)
    assert np.all(d1[s > 2.5] == psi.slope)
    # no jumps in the second derivative, and it leaves both seams flat
    jumps = np.abs(np.diff(d2))
    assert np.max(jumps) <= 2 * 2.0 * 1.875 * 0.01 * 1.001
    seams = np.isclose(s[:-1], 1.5) | np.isclose(s[:-1], 2.49)
    assert np.max(jumps[seams]) < 1e-3
    assert np.allclose(np.gradient(val, s)[1:-1], d1[1:-1], atol=1e-3)


def test_threshold_error_reports_minimum():
    h0 = BumpCouplingH0()
    need = minimal_constant(h0)
    with pytest.raises(ThresholdError) as info:
        build_example_hamiltonian(h0, 0.5 * need)
    assert info.value.minimal == pytest.approx(need)
    assert build_example_hamiltonian(h0, need + 1e-9).C0_large > 0


def test_bump_h0_support():
    h0 = BumpCouplingH0(R0=2.0)
    mu = sample_gaussian(10, 0.0, 1.0, seed=1)
    far = np.array([[2.5], [-3.0]])
    p = np.ones_like(far)
    assert np.all(h0.value(far, mu, p) == 0.0)
    # atoms outside the support do not feel a measure derivative
    mu_far = DiscreteMeasure.uniform([[0.0], [3.0]])
    assert np.all(h0.dmu(np.zeros((1, 1)), mu_far, mu_far.atoms, np.ones((1, 1)))[0, 1] == 0.0)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------


def test_registry_models():
    h, g = make_model("lq", {"q": 1.0, "c": -2.0})
    assert isinstance(h, SeparableHamiltonian)
    assert g.g == 1.0
    h, g = make_model("constructed", {})
    assert h.c0 > 0
    h, g = make_model("separable", {"kinetic": {"name": "logcosh"},
                                    "coupling": {"name": "interaction", "strength": 0.5}})
    assert isinstance(h.kinetic, LogCoshKinetic)
    with pytest.raises(ValueError):
        make_model("nope")


def test_registry_surfaces():
    s = make_surface({"name": "convexified", "base": {"name": "product"}})
    assert isinstance(s, ConvexifiedSurface)
    with pytest.raises(ValueError):
        make_surface({"name": "nope"})
