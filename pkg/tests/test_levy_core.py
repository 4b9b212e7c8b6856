"""Tests for levyq.levy_core."""

import math

import numpy as np
import pytest
from scipy import special

from levyq.levy_core import (
    Family,
    KernelSection,
    LevyDensity,
    TailFunction,
    expected_jump_count,
    explicit_F_bound,
    gauss_mean,
    integrate_F,
    inverse_tail,
    laplace_exponent,
    levy_from_spec,
    levy_integral,
    make_levy_density,
    reference_marginal,
    tail_exact,
    tail_mass,
    truncation_log_bound,
    validate_class_L,
    zeta_l1,
)
from levyq.transform import KERNELS, kernel_from_spec
from levyq.types import ConfigError, KernelSpec, LevySpec, SizingError

EIN_1 = 0.7965995992970531  # int_0^1 (1 - e^-x)/x dx


def _custom(g0: float, rate: float):
    return make_levy_density(
        Family.CUSTOM, {"density": lambda x: g0 * np.exp(-rate * np.asarray(x)) / np.asarray(x), "g0": g0}
    )


def test_gamma_is_class_L(gamma):
    """The gamma density passes both integrability checks."""
    report = validate_class_L(gamma)
    assert report.ok
    assert report.h2_value == pytest.approx(EIN_1, abs=1e-6)
    assert report.h1_value == pytest.approx(special.exp1(1.0), abs=1e-6)


def test_wrong_g0_is_not_class_L():
    """A custom density whose declared g0 misses the singularity fails (H2)."""
    with pytest.raises(ConfigError, match="class"):
        make_levy_density(Family.CUSTOM, {"density": lambda x: np.exp(-x) / x, "g0": 2.0})


def test_non_integrable_tail_is_rejected():
    """g(x) = 1/x everywhere has no finite tail."""
    unchecked = LevyDensity(Family.CUSTOM, g0=1.0, rate=math.nan, custom=lambda x: 1.0 / np.asarray(x))
    report = validate_class_L(unchecked)
    assert not report.h1_ok
    assert not report.ok


def test_tempered_parameters_validated():
    """tempered_log needs positive g0 and rate."""
    with pytest.raises(ConfigError):
        make_levy_density(Family.TEMPERED_LOG, {"g0": 0.0})
    with pytest.raises(ConfigError):
        make_levy_density(Family.TEMPERED_LOG, {"rate": -1.0})


def test_levy_from_spec_maps_scaled_gamma():
    """A gamma spec with g0 or rate off 1 becomes the tempered family."""
    assert levy_from_spec(LevySpec()).family is Family.GAMMA
    scaled = levy_from_spec(LevySpec(family="gamma", g0=2.0))
    assert scaled.family is Family.TEMPERED_LOG
    assert scaled.g0 == 2.0


def test_zeta_l1_closed_form_matches_quadrature():
    """Ein-based closed form agrees with direct quadrature of |zeta|."""
    closed = make_levy_density(Family.TEMPERED_LOG, {"g0": 0.5, "rate": 2.0})
    numeric = _custom(0.5, 2.0)
    assert zeta_l1(closed) == pytest.approx(zeta_l1(numeric), rel=1e-8)
    assert zeta_l1(make_levy_density(Family.GAMMA)) == pytest.approx(EIN_1, rel=1e-12)
    assert zeta_l1(closed, 1e-6) == pytest.approx(0.5 * 2e-6, rel=1e-5)


def test_laplace_exponent(gamma, tempered):
    """Psi(lambda) = g0 log(1 + lambda/b); quadrature agrees for custom densities."""
    assert laplace_exponent(gamma, 1.0) == pytest.approx(math.log(2.0))
    assert laplace_exponent(tempered, 1.0) == pytest.approx(0.5 * math.log(1.5))
    assert laplace_exponent(_custom(0.5, 2.0), 1.0) == pytest.approx(0.5 * math.log(1.5), rel=1e-9)
    assert laplace_exponent(gamma, 0.0) == 0.0
    with pytest.raises(ValueError):
        laplace_exponent(gamma, -1.0)


def test_laplace_exponent_nondecreasing_concave(gamma, tempered):
    """Psi is a Bernstein function: nondecreasing and concave on [0, inf)."""
    grid = np.linspace(0.0, 10.0, 41)
    for levy in (gamma, tempered, _custom(0.5, 2.0)):
        psi = np.array([laplace_exponent(levy, lam) for lam in grid])
        assert np.all(np.diff(psi) >= 0)
        assert np.all(np.diff(psi, 2) <= 1e-9)


def test_tail_exact(gamma):
    """nu_bar(1) = E1(1) for the gamma process."""
    assert tail_exact(gamma, 1.0) == pytest.approx(0.21938393439552, rel=1e-12)
    assert tail_exact(_custom(1.0, 1.0), 1.0) == pytest.approx(0.21938393439552, rel=1e-9)


def test_levy_integral_absorbs_singularity(gamma):
    """int x g(x) dx over (0, eps) is 1 - exp(-eps) for the gamma process."""
    value, err = levy_integral(gamma, lambda x: x, upper=1e-3)
    assert value == pytest.approx(-math.expm1(-1e-3), rel=1e-10)
    assert err < 1e-10
    assert levy_integral(gamma, lambda x: 1.0, lower=2.0, upper=1.0) == (0.0, 0.0)


def test_reference_marginal(tempered):
    """xi_t ~ Gamma(g0 t, rate b)."""
    law = reference_marginal(tempered, 2.0)
    assert law.mean() == pytest.approx(0.5 * 2.0 / 2.0)
    assert law.var() == pytest.approx(1.0 / 4.0)
    with pytest.raises(ConfigError):
        reference_marginal(_custom(1.0, 1.0), 1.0)


def test_inverse_tail_inverts(gamma):
    """nu_bar(inverse_tail(u)) = u across many decades."""
    tf = TailFunction(gamma)
    u = np.geomspace(1e-10, 30.0, 50)
    x = inverse_tail(tf, u)
    assert np.all(np.diff(x) < 0)
    assert np.allclose(tail_mass(tf, x), u, rtol=1e-10)
    assert inverse_tail(tf, np.empty(0)).size == 0
    with pytest.raises(ValueError):
        inverse_tail(tf, 0.0)


def test_inverse_tail_beyond_table_raises(gamma):
    """A tail mass whose preimage underflows the table is refused, not clipped to its edge."""
    tf = TailFunction(gamma)
    assert inverse_tail(tf, 600.0) == pytest.approx(math.exp(-600.0 - np.euler_gamma), rel=1e-6)
    with pytest.raises(SizingError, match="raise eps"):
        inverse_tail(tf, 1e4)


def test_custom_tail_table():
    """The interpolated tail of a custom density tracks the closed form."""
    tf = TailFunction(_custom(0.5, 2.0), grid_points=1024)
    xs = np.array([1e-8, 1e-4, 0.1, 1.0, 3.0])
    exact = 0.5 * special.exp1(2.0 * xs)
    assert np.allclose(tail_mass(tf, xs), exact, rtol=1e-3)
    u = tail_mass(tf, 0.5)
    assert inverse_tail(tf, u) == pytest.approx(0.5, rel=1e-6)


def test_expected_jump_count(gamma):
    """horizon * E1(eps)."""
    tf = TailFunction(gamma)
    assert expected_jump_count(tf, 2.0, 1e-6) == pytest.approx(2.0 * special.exp1(1e-6), rel=1e-10)


@pytest.mark.parametrize("name", ["identity", "linear", "damped_exp", "cosine_bump", "rational"])
@pytest.mark.parametrize("a", [0.0, 0.5, 1.0, 2.0])
def test_compensator_identity(gamma, tempered, name, a):
    """int F_{a,phi} g dx = -Psi(a) - g0 log phi'(0), with |F| g below the explicit bound."""
    section = KERNELS[name]().section(0.0)
    for levy in (gamma, tempered):
        res = integrate_F(levy, section, a)
        assert res.residual <= 1e-6
        assert res.absolute <= res.bound


@pytest.mark.parametrize("name", ["damped_exp", "rational", "cosine_bump"])
@pytest.mark.parametrize("state", [0.4, 1.3, 5.0])
def test_compensator_identity_from_running_state(gamma, name, state):
    """Composition sections read k from the left limit; the identity uses h(s, state)."""
    section = kernel_from_spec(KernelSpec(name=name, mode="composition")).section(0.5, state=state)
    res = integrate_F(gamma, section, 0.5)
    assert res.residual <= 1e-6
    assert res.absolute <= res.bound


def test_linear_section_identity_value(gamma):
    """For phi(x) = 2x and a = 0 the integral is -log 2."""
    section = KernelSection(phi=lambda x: 2 * np.asarray(x), dphi=lambda x: np.full(np.shape(x), 2.0), kappa=2, alpha=0.5)
    res = integrate_F(gamma, section, 0.0)
    assert res.signed == pytest.approx(-math.log(2.0), abs=1e-9)
    with pytest.raises(ValueError):
        integrate_F(gamma, section, -1.0)


def test_explicit_bound_grows_with_a(gamma):
    assert explicit_F_bound(gamma, 2.0, 0.5, 1.0) > explicit_F_bound(gamma, 2.0, 0.5, 0.0)


def test_truncation_bound_vanishes_with_eps(gamma):
    """The small-jump bound decreases to zero as eps does."""
    bounds = [truncation_log_bound(gamma, 2.0, 0.9, 1.0, eps, 1.0) for eps in (1e-2, 1e-4, 1e-6, 1e-8)]
    assert all(b > c for b, c in zip(bounds, bounds[1:]))
    assert bounds[-1] < 1e-6
    assert truncation_log_bound(gamma, 2.0, 0.9, 0.0, 1e-4, 2.0) == pytest.approx(
        2.0 * truncation_log_bound(gamma, 2.0, 0.9, 0.0, 1e-4, 1.0)
    )


def test_gauss_mean_exact_for_polynomials():
    """15 nodes integrate cubics exactly."""
    means = gauss_mean(lambda x: x**3, [0.0, 1.0], [2.0, 3.0])
    assert means[0] == pytest.approx(2.0)
    assert means[1] == pytest.approx((3.0**4 - 1.0) / 4 / 2.0)
