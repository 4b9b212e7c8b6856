"""Tests for levyq.transform."""

import math

import numpy as np
import pytest

from levyq.simulate import sample_jump_path
from levyq.transform import (
    KERNELS,
    Kernel,
    KernelGrid,
    Mode,
    apply_composition,
    apply_jump_transform,
    damped_exp_kernel,
    inverse_kernel,
    invert_jump_transform,
    kernel_from_spec,
    kernel_increment,
    kernel_primitive,
    linear_kernel,
    rational_kernel,
    register_kernel,
    validate_kernel,
)
from levyq.types import ConfigError, KernelSpec


def test_registry_has_builtin_kernels():
    assert {"identity", "linear", "damped_exp", "cosine_bump", "rational", "time_modulated"} <= set(KERNELS)


def test_register_kernel_adds_factory():
    """Custom kernels are reachable by name from a spec."""

    @register_kernel("test_half")
    def half() -> Kernel:
        return linear_kernel(0.5)

    try:
        kernel = kernel_from_spec(KernelSpec(name="test_half"))
        assert kernel_primitive(kernel, 0.0, 4.0) == pytest.approx(2.0)
    finally:
        KERNELS.pop("test_half")


def test_kernel_declaration_checked():
    """kappa must exceed 1 and alpha lie in (0, 1)."""
    with pytest.raises(ConfigError, match="kappa"):
        Kernel(k=lambda s, x: np.ones_like(x), kappa=1.0, alpha=0.5)
    with pytest.raises(ConfigError, match="alpha"):
        Kernel(k=lambda s, x: np.ones_like(x), kappa=2.0, alpha=1.0)
    with pytest.raises(ConfigError):
        linear_kernel(-1.0)


def test_quadrature_primitive_matches_closed_form():
    """Without a closed form, K is integrated numerically and cached."""
    closed = damped_exp_kernel(1.0, 0.5)
    bare = Kernel(k=closed.k, kappa=closed.kappa, alpha=closed.alpha, name="bare")
    xs = np.array([0.0, 0.3, 1.0, 4.0])
    np.testing.assert_allclose(kernel_primitive(bare, 0.0, xs), kernel_primitive(closed, 0.0, xs), rtol=1e-11)
    assert (0.0, 1.0) in bare.cache


def test_quadrature_cache_is_bounded(monkeypatch):
    """Distinct (s, x) pairs never grow the cache past its limit."""
    monkeypatch.setattr("levyq.transform.CACHE_LIMIT", 8)
    closed = damped_exp_kernel(1.0, 0.5)
    bare = Kernel(k=closed.k, kappa=closed.kappa, alpha=closed.alpha, name="bare")
    xs = np.linspace(0.01, 3.0, 50)
    np.testing.assert_allclose(kernel_primitive(bare, 0.2, xs), kernel_primitive(closed, 0.2, xs), rtol=1e-11)
    assert 0 < len(bare.cache) <= 8


def test_newton_inverse():
    """J(s, K(s, x)) = x for a kernel without a closed-form inverse."""
    kernel = rational_kernel(1.0)
    xs = np.array([0.0, 1e-6, 0.5, 3.0, 40.0])
    ys = kernel_primitive(kernel, 0.0, xs)
    np.testing.assert_allclose(inverse_kernel(kernel, 0.0, ys), xs, rtol=1e-10, atol=1e-12)
    with pytest.raises(ValueError):
        inverse_kernel(kernel, 0.0, -1.0)


def test_increment_narrow_and_wide_agree():
    """Gauss-Legendre on narrow intervals matches the primitive difference."""
    kernel = damped_exp_kernel(1.0, 0.5)
    left = np.array([0.1, 2.0, 2.0])
    width = np.array([1e-5, 1e-7, 1.0])
    exact = kernel_primitive(kernel, 0.0, left + width) - kernel_primitive(kernel, 0.0, left)
    got = kernel_increment(kernel, np.zeros(3), left, width)
    np.testing.assert_allclose(got[2], exact[2], rtol=1e-12)
    # narrow: k(left) * width to second order
    np.testing.assert_allclose(got[:2], (1 + 0.5 * np.exp(-left[:2])) * width[:2], rtol=1e-4)
    with pytest.raises(ValueError):
        kernel_increment(kernel, 0.0, 1.0, -1e-3)


def test_increment_keeps_widths_below_one_ulp():
    """A jump far below the resolution of the running value still moves K by k * x."""
    kernel = damped_exp_kernel(1.0, 0.5)
    x = np.array([1e-20, 1e-17, 1e-12, 1e-9])
    got = kernel_increment(kernel, 0.5, 1.3, x)
    np.testing.assert_allclose(got / x, 1 + 0.5 * math.exp(-1.3), rtol=1e-9)

    field = kernel_from_spec(KernelSpec(name="damped_exp", mode="composition")).field()
    log_h, H = field.jump_terms(0.5, np.full(4, 1.3), x)
    assert np.all(H > 0)
    np.testing.assert_allclose(H / x, np.exp(log_h), rtol=1e-9)


def test_jump_transform_round_trip(hand_path):
    """Sizes become K(s_i, x_i); the inverse recovers them."""
    kernel = rational_kernel(1.0)
    moved = apply_jump_transform(hand_path, kernel)
    np.testing.assert_allclose(moved.sizes, hand_path.sizes + np.log1p(hand_path.sizes))
    np.testing.assert_array_equal(moved.times, hand_path.times)
    assert moved.truncation == pytest.approx(hand_path.truncation / kernel.kappa)
    back = invert_jump_transform(moved, kernel)
    np.testing.assert_allclose(back.sizes, hand_path.sizes, rtol=1e-10)


def test_composition_telescopes(gamma):
    """Without time dependence the transformed value at T is K(xi_T)."""
    kernel = kernel_from_spec(KernelSpec(name="damped_exp", mode="composition"))
    path = sample_jump_path(gamma, 1.0, 1e-4, seed=21)
    moved = apply_composition(path, kernel)
    assert moved.value(1.0) == pytest.approx(kernel_primitive(kernel, 0.0, path.value(1.0)), rel=1e-9)
    assert np.all(moved.sizes > 0)


def test_mode_mismatch(hand_path):
    with pytest.raises(ValueError):
        apply_composition(hand_path, linear_kernel(2.0))
    composition = kernel_from_spec(KernelSpec(name="linear", mode="composition"))
    with pytest.raises(ValueError):
        apply_jump_transform(hand_path, composition)


@pytest.mark.parametrize("name", ["identity", "linear", "damped_exp", "cosine_bump", "rational", "time_modulated"])
def test_builtin_kernels_validate(name):
    """Every built-in satisfies its own (kappa, alpha) declaration."""
    report = validate_kernel(KERNELS[name]())
    assert report.ok, report.message


def test_validate_kernel_flags_tight_kappa():
    """damped_exp(1, 0.5) reaches k = 1.5, so kappa = 1.2 is a lie."""
    kernel = kernel_from_spec(KernelSpec(name="damped_exp", kappa=1.2))
    report = validate_kernel(kernel, KernelGrid(times=(0.0,)))
    assert not report.ok
    assert "kappa" in report.message


def test_normalized_kernel_fixes_one():
    """normalize rescales so that K(s, 1) = 1."""
    kernel = kernel_from_spec(KernelSpec(name="damped_exp", mode="composition", normalize=True))
    assert kernel_primitive(kernel, 0.0, 1.0) == pytest.approx(1.0)
    assert kernel.mode is Mode.COMPOSITION
    assert inverse_kernel(kernel, 0.0, 1.0) == pytest.approx(1.0, rel=1e-9)

    timed = kernel_from_spec(KernelSpec(name="time_modulated", normalize=True))
    for s in (0.1, 0.6):
        assert kernel_primitive(timed, s, 1.0) == pytest.approx(1.0)


def test_spec_errors():
    """Unknown names and bad parameters are config errors."""
    with pytest.raises(ConfigError, match="unknown kernel"):
        kernel_from_spec(KernelSpec(name="nope"))
    with pytest.raises(ConfigError):
        kernel_from_spec(KernelSpec(name="linear", params={"slope": 2.0}))


def test_spec_overrides_declaration():
    kernel = kernel_from_spec(KernelSpec(name="linear", params={"c": 3.0}, kappa=4.0, alpha=0.5))
    assert kernel.kappa == 4.0
    assert kernel.alpha == 0.5
    assert kernel.mode is Mode.JUMP


def test_sections():
    """Jump sections ignore the state; composition sections start at it."""
    jump = damped_exp_kernel(1.0, 0.5)
    section = jump.section(0.0, state=5.0)
    assert section.dphi0 == pytest.approx(1.5)
    assert float(section.phi(2.0)) == pytest.approx(2.0 + 0.5 * (1 - math.exp(-2.0)))

    comp = kernel_from_spec(KernelSpec(name="damped_exp", mode="composition")).section(0.0, state=1.0)
    assert comp.dphi0 == pytest.approx(1.0 + 0.5 * math.exp(-1.0))
    assert float(comp.phi(0.0)) == pytest.approx(0.0)
    assert float(comp.phi(1.0)) == pytest.approx(1.0 + 0.5 * (math.exp(-1.0) - math.exp(-2.0)))
