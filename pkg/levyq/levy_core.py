"""Class-(L) Lévy densities, Laplace exponents, tail functions and singular quadrature.

A density in class (L) has the form g(x) = g0/x + zeta(x) on (0, 1] with an
integrable remainder zeta and an integrable tail on [1, inf). The gamma
process (g0 = 1, g(x) = exp(-x)/x) is the reference member.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Any, Callable

import numpy as np
from scipy import integrate, special, stats

from levyq.types import ConfigError, LevySpec, QuadratureError, SizingError

logger = logging.getLogger(__name__)

ArrayFn = Callable[[Any], Any]

# Below this, x * g(x) is taken as its limit and F-integrands are treated as vanished.
_TINY = 1e-300


class Family(str, Enum):
    GAMMA = "gamma"
    TEMPERED_LOG = "tempered_log"
    CUSTOM = "custom"


@dataclass(frozen=True)
class LevyDensity:
    """Lévy density g of a class-(L) subordinator.

    Built-in families carry their rate b (g = g0 exp(-b x)/x); custom
    densities carry the user function and a user-supplied g0, from which
    zeta is derived.
    """

    family: Family
    g0: float
    rate: float = 1.0
    custom: ArrayFn | None = field(default=None, repr=False)

    @property
    def closed_form(self) -> bool:
        return self.family is not Family.CUSTOM

    def density(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return self.g0 * np.exp(-self.rate * x) / x
        return np.asarray(self.custom(x), dtype=float)

    def log_density(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return math.log(self.g0) - self.rate * x - np.log(x)
        return np.log(self.density(x))

    def x_density(self, x: Any) -> Any:
        """x * g(x), bounded near 0."""
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return self.g0 * np.exp(-self.rate * x)
        return x * self.density(x)

    def zeta(self, x: Any) -> Any:
        """zeta(x) = g(x) - g0/x."""
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return self.g0 * np.expm1(-self.rate * x) / x
        return self.density(x) - self.g0 / x

    def log_ratio(self, y: Any, x: Any) -> Any:
        """log g(y) - log g(x), without forming either logarithm for built-ins."""
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            return -self.rate * (y - x) - np.log(y / x)
        return self.log_density(y) - self.log_density(x)


def checked_quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    *,
    what: str,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
    limit: int = 400,
) -> tuple[float, float]:
    """scipy quad that raises QuadratureError instead of warning."""
    out = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    value, err = float(out[0]), float(out[1])
    if not math.isfinite(value):
        raise QuadratureError(f"{what}: non-finite result", err)
    if len(out) > 3 and err > 1e-7 * max(1.0, abs(value)):
        raise QuadratureError(f"{what}: {out[3].splitlines()[0]}", err)
    return value, err


def levy_integral(
    levy: LevyDensity,
    F: Callable[[float], float],
    *,
    lower: float = 0.0,
    upper: float = math.inf,
    absolute: bool = False,
) -> tuple[float, float]:
    """Integral of F(x) g(x) dx over (lower, upper), with its error estimate.

    The part inside (0, 1] is integrated in u = -log x, where the integrand
    becomes F(x) * x g(x): the g0/x singularity is absorbed analytically and
    the O(x^alpha) decay of F near 0 becomes exponential decay in u.
    """
    if upper <= lower:
        return 0.0, 0.0
    total, total_err = 0.0, 0.0
    split = 1.0

    if lower < split:
        u_lo = -math.log(min(split, upper))
        u_hi = math.inf if lower <= 0.0 else -math.log(lower)

        def near(u: float) -> float:
            x = math.exp(-u)
            if x < _TINY:
                return 0.0
            v = float(F(x)) * float(levy.x_density(x))
            return abs(v) if absolute else v

        value, err = checked_quad(near, u_lo, u_hi, what="levy_integral near 0")
        total += value
        total_err += err

    if upper > split:

        def far(x: float) -> float:
            gx = float(levy.density(x))
            if gx == 0.0:
                return 0.0
            v = float(F(x)) * gx
            return abs(v) if absolute else v

        value, err = checked_quad(far, max(split, lower), upper, what="levy_integral tail")
        total += value
        total_err += err

    return total, total_err


def tail_exact(levy: LevyDensity, x: float) -> float:
    """nu_bar(x) = integral of g over (x, inf), closed form where available."""
    if levy.closed_form:
        return float(levy.g0 * special.exp1(levy.rate * x))
    value, _ = levy_integral(levy, lambda y: 1.0, lower=x)
    return value


def zeta_l1(levy: LevyDensity, upper: float = 1.0) -> float:
    """Integral of |zeta| over (0, upper]."""
    if levy.closed_form:
        z = levy.rate * upper
        # Ein(z) = gamma_E + log z + E1(z); the series avoids cancellation for small z.
        if z < 1e-3:
            ein = z - z * z / 4.0 + z**3 / 18.0
        else:
            ein = float(np.euler_gamma + math.log(z) + special.exp1(z))
        return levy.g0 * ein

    def integrand(u: float) -> float:
        x = math.exp(-u)
        return abs(float(levy.zeta(x))) * x

    value, _ = checked_quad(integrand, -math.log(upper), 700.0, what="zeta L1 norm")
    return value


@dataclass(frozen=True)
class ClassLReport:
    positive: bool
    h1_value: float
    h1_ok: bool
    h2_value: float
    h2_ok: bool
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.positive and self.h1_ok and self.h2_ok


def _doubling_integral(
    f: Callable[[float], float], start: float, factor: float, tol: float, what: str
) -> tuple[float, bool]:
    """Sum integrals over [start*factor^j, start*factor^(j+1)] until increments fall below tol.

    Returns (total, converged). Eight consecutive non-shrinking increments
    count as divergence.
    """
    total = 0.0
    prev = math.inf
    growing = 0
    a = start
    for _ in range(400):
        b = a * factor
        lo, hi = (a, b) if b > a else (b, a)
        if hi > 1e300 or lo < 1e-300:
            break
        try:
            inc, _ = checked_quad(f, lo, hi, what=what, epsabs=1e-15, epsrel=1e-12)
        except QuadratureError:
            return total, False
        total += inc
        if inc <= tol * max(1.0, total):
            return total, True
        growing = growing + 1 if inc >= prev else 0
        if growing >= 8 or not math.isfinite(total):
            return total, False
        prev = inc
        a = b
    return total, False


def validate_class_L(levy: LevyDensity, tol: float = 1e-8) -> ClassLReport:
    """Numerically check (H1) g > 0, int_1^inf g < inf and (H2) int_0^1 |zeta| < inf."""
    grid = np.geomspace(1e-12, 1e3, 4096)
    with np.errstate(all="ignore"):
        values = levy.density(grid)
    # far-tail values may underflow to 0
    positive = bool(np.all(np.isfinite(values)) and np.all(values >= 0) and np.all(values[grid <= 1.0] > 0))

    h1, h1_ok = _doubling_integral(lambda x: float(levy.density(x)), 1.0, 2.0, tol, "(H1) tail")
    h2, h2_ok = _doubling_integral(lambda x: abs(float(levy.zeta(x))), 1.0, 0.5, tol, "(H2) zeta")

    problems = []
    if not positive:
        problems.append("g is not positive and finite on the sample grid")
    if not h1_ok:
        problems.append("integral of g over [1, inf) does not converge")
    if not h2_ok:
        problems.append("integral of |zeta| over (0, 1] does not converge (check g0)")
    return ClassLReport(positive, h1, h1_ok, h2, h2_ok, "; ".join(problems))


def make_levy_density(
    family: Family | str,
    params: dict[str, Any] | None = None,
) -> LevyDensity:
    """Build and validate a class-(L) density.

    params: {} for gamma; {"g0", "rate"} for tempered_log; {"density", "g0"}
    for custom, where density is a vectorized callable.
    """
    family = Family(family)
    params = dict(params or {})
    if family is Family.GAMMA:
        levy = LevyDensity(Family.GAMMA, g0=1.0, rate=1.0)
    elif family is Family.TEMPERED_LOG:
        g0 = float(params.get("g0", 1.0))
        rate = float(params.get("rate", 1.0))
        if g0 <= 0 or rate <= 0:
            raise ConfigError(f"tempered_log needs g0 > 0 and rate > 0, got g0={g0}, rate={rate}")
        levy = LevyDensity(Family.TEMPERED_LOG, g0=g0, rate=rate)
    else:
        if "density" not in params or "g0" not in params:
            raise ConfigError("custom densities need both 'density' and 'g0'")
        g0 = float(params["g0"])
        if g0 <= 0:
            raise ConfigError(f"custom density needs g0 > 0, got {g0}")
        levy = LevyDensity(Family.CUSTOM, g0=g0, rate=math.nan, custom=params["density"])

    report = validate_class_L(levy)
    if not report.ok:
        raise ConfigError(f"{family.value} density is not in class (L): {report.message}")
    return levy


def levy_from_spec(spec: LevySpec) -> LevyDensity:
    if spec.family == "gamma":
        if spec.g0 != 1.0 or spec.rate != 1.0:
            return make_levy_density(Family.TEMPERED_LOG, {"g0": spec.g0, "rate": spec.rate})
        return make_levy_density(Family.GAMMA)
    return make_levy_density(Family.TEMPERED_LOG, {"g0": spec.g0, "rate": spec.rate})


def laplace_exponent(levy: LevyDensity, lam: float) -> float:
    """Psi(lambda) = int (1 - exp(-lambda x)) g(x) dx."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if lam == 0:
        return 0.0
    if levy.closed_form:
        return levy.g0 * math.log1p(lam / levy.rate)
    value, _ = levy_integral(levy, lambda x: -math.expm1(-lam * x))
    return value


def gamma_marginal_density(t: float, x: Any) -> Any:
    """Gamma(t, 1) density p_t(x), zero for x < 0."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    return stats.gamma.pdf(x, a=t)


def reference_marginal(levy: LevyDensity, t: float) -> Any:
    """Law of xi_t for the built-in families: Gamma(shape g0 t, rate b)."""
    if not levy.closed_form:
        raise ConfigError("no analytic marginal law for custom densities")
    return stats.gamma(a=levy.g0 * t, scale=1.0 / levy.rate)


class TailFunction:
    """Tail nu_bar(x) = int_x^inf g with a cached log-log table for inversion.

    The table is a log-spaced grid on [x_min, x_max], x_max chosen so that
    nu_bar(x_max) < tail_floor. Values outside the table extend it.
    """

    def __init__(
        self,
        levy: LevyDensity,
        grid_points: int = 2048,
        x_min: float = 1e-12,
        tail_floor: float = 1e-14,
    ) -> None:
        self.levy = levy
        self.grid_points = grid_points
        self.tail_floor = tail_floor
        x_max = 1.0
        while tail_exact(levy, x_max) >= tail_floor:
            x_max *= 2.0
            if x_max > 1e6:
                raise ConfigError("tail mass does not fall below the floor; is g integrable?")
        self._build(x_min, x_max)

    def _build(self, x_lo: float, x_hi: float) -> None:
        from scipy.interpolate import PchipInterpolator

        grid = np.geomspace(x_lo, x_hi, self.grid_points)
        if self.levy.closed_form:
            values = self.levy.g0 * special.exp1(self.levy.rate * grid)
        else:
            pieces = np.empty(len(grid))
            pieces[-1] = tail_exact(self.levy, float(grid[-1]))
            for i in range(len(grid) - 2, -1, -1):
                piece, _ = checked_quad(
                    lambda x: float(self.levy.density(x)), float(grid[i]), float(grid[i + 1]), what="tail table"
                )
                pieces[i] = piece
            values = np.cumsum(pieces[::-1])[::-1]
        self._log_grid = np.log(grid)
        self._log_values = np.log(values)
        self._interp = PchipInterpolator(self._log_grid, self._log_values)
        self._slope = self._interp.derivative()

    @property
    def x_range(self) -> tuple[float, float]:
        return float(np.exp(self._log_grid[0])), float(np.exp(self._log_grid[-1]))

    def _extend_to(self, u_max: float, u_min: float) -> None:
        x_lo, x_hi = self.x_range
        x_cap = 700.0 / self.levy.rate if self.levy.closed_form else 1e6
        changed = False
        while u_max > math.exp(self._log_values[0]) and x_lo > 1e-290:
            x_lo *= 1e-4
            self._build(x_lo, x_hi)
            changed = True
        if u_max > math.exp(self._log_values[0]):
            raise SizingError(
                f"tail mass {u_max:.3g} lies beyond the tail table (nu_bar({x_lo:.3g}) = "
                f"{math.exp(self._log_values[0]):.3g}); raise eps"
            )
        while u_min < math.exp(self._log_values[-1]) and x_hi < x_cap:
            x_hi *= 2.0
            self._build(x_lo, x_hi)
            changed = True
        if changed:
            logger.warning("tail cache extended to [%.3g, %.3g]", *self.x_range)

    def log_tail(self, log_x: Any) -> Any:
        log_x = np.asarray(log_x, dtype=float)
        if self.levy.closed_form:
            x = np.exp(log_x)
            return np.log(self.levy.g0 * special.exp1(self.levy.rate * x))
        return self._interp(log_x)

    def _log_tail_slope(self, log_x: Any) -> Any:
        """d log nu_bar / d log x = -x g(x) / nu_bar(x)."""
        if self.levy.closed_form:
            x = np.exp(log_x)
            return -self.levy.x_density(x) / np.exp(self.log_tail(log_x))
        return self._slope(log_x)


def tail_mass(tf: TailFunction, x: Any) -> Any:
    """nu_bar(x); scalar in, float out."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("tail_mass needs x > 0")
    if not tf.levy.closed_form:
        lo, hi = tf.x_range
        u_max = tail_exact(tf.levy, float(arr.min())) if arr.min() < lo else 0.0
        u_min = tail_exact(tf.levy, float(arr.max())) if arr.max() > hi else math.inf
        tf._extend_to(u_max, u_min)
    out = np.exp(tf.log_tail(np.log(arr)))
    return float(out) if out.ndim == 0 else out


def inverse_tail(tf: TailFunction, u: Any) -> Any:
    """x with nu_bar(x) = u: bracket by bisection on the cached table, then safeguarded Newton in log x."""
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if arr.size == 0:
        return arr.copy()
    if np.any(arr <= 0):
        raise ValueError("inverse_tail needs u > 0")
    tf._extend_to(float(arr.max()), float(arr.min()))

    target = np.log(arr)
    desc = -tf._log_values
    idx = np.clip(np.searchsorted(desc, -target), 1, len(desc) - 1)
    lo = tf._log_grid[idx - 1].copy()
    hi = tf._log_grid[idx].copy()
    v_lo = tf._log_values[idx - 1]
    v_hi = tf._log_values[idx]
    w = np.clip((v_lo - target) / (v_lo - v_hi), 0.0, 1.0)
    y = lo + w * (hi - lo)
    # bracket may be outside the table when u sits exactly on an endpoint
    lo -= 1e-12
    hi += 1e-12

    for _ in range(60):
        f = tf.log_tail(y) - target
        lo = np.where(f > 0, y, lo)
        hi = np.where(f <= 0, y, hi)
        slope = tf._log_tail_slope(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_new = y - f / slope
        outside = ~np.isfinite(y_new) | (y_new <= lo) | (y_new >= hi)
        y_new = np.where(outside, 0.5 * (lo + hi), y_new)
        done = np.abs(y_new - y) <= 1e-14 * np.maximum(1.0, np.abs(y))
        y = y_new
        if np.all(done):
            break
    out = np.exp(y)
    return float(out[0]) if scalar else out


def expected_jump_count(tf: TailFunction, horizon: float, eps: float) -> float:
    return horizon * tail_mass(tf, eps)


@dataclass(frozen=True)
class KernelSection:
    """Single-time section phi = H(s, .) with derivative dphi = h(s, .).

    phi is a C^1 bijection of [0, inf) with phi(0) = 0 and
    1/kappa <= dphi <= kappa.
    """

    phi: ArrayFn
    dphi: ArrayFn
    kappa: float
    alpha: float

    @property
    def dphi0(self) -> float:
        return float(self.dphi(0.0))


def section_log1p_F(levy: LevyDensity, section: KernelSection, a: float, x: Any) -> Any:
    """log(1 + F_{a,phi}(x)) = log phi'(x) + log g(phi(x)) - log g(x) - a phi(x)."""
    x = np.asarray(x, dtype=float)
    y = section.phi(x)
    return np.log(section.dphi(x)) + levy.log_ratio(y, x) - a * y


def section_F(levy: LevyDensity, section: KernelSection, a: float, x: Any) -> Any:
    return np.expm1(section_log1p_F(levy, section, a, x))


@dataclass(frozen=True)
class FIntegral:
    signed: float
    absolute: float
    error: float
    target: float
    bound: float

    @property
    def residual(self) -> float:
        return abs(self.signed - self.target)


def integrate_F(
    levy: LevyDensity,
    phi: KernelSection,
    a: float,
    *,
    lower: float = 0.0,
    upper: float = math.inf,
) -> FIntegral:
    """Signed and absolute integrals of F_{a,phi} g, with the closed-form target.

    Over the full half-line the signed integral equals -Psi(a) - g0 log phi'(0);
    bound is the explicit constant from the integrability estimate.
    """
    if a < 0:
        raise ValueError(f"a must be nonnegative, got {a}")

    def F(x: float) -> float:
        return float(section_F(levy, phi, a, x))

    signed, err_s = levy_integral(levy, F, lower=lower, upper=upper)
    absolute, err_a = levy_integral(levy, F, lower=lower, upper=upper, absolute=True)
    if not math.isfinite(absolute):
        raise QuadratureError("integral of |F| g diverges", err_a)
    target = -laplace_exponent(levy, a) - levy.g0 * math.log(phi.dphi0)
    return FIntegral(signed, absolute, max(err_s, err_a), target, explicit_F_bound(levy, phi.kappa, phi.alpha, a))


def explicit_F_bound(levy: LevyDensity, kappa: float, alpha: float, a: float) -> float:
    """2 a g0 + g0 kappa^2/(alpha(1+alpha)) + 2 nu_bar(kappa^-2) + 4 int_0^1 |zeta|."""
    g0 = levy.g0
    return (
        2 * a * g0
        + g0 * kappa**2 / (alpha * (1 + alpha))
        + 2 * tail_exact(levy, kappa**-2)
        + 4 * zeta_l1(levy, 1.0)
    )


@lru_cache(maxsize=256)
def truncation_log_bound(
    levy: LevyDensity, kappa: float, alpha: float, a_max: float, eps: float, horizon: float
) -> float:
    """Bound on horizon * int_0^eps |F| g dx for every section in the (kappa, alpha) class."""
    g0 = levy.g0
    reach = min(1.0, kappa * eps)
    per_time = (
        g0 * kappa**2 * eps**alpha / (alpha * (1 + alpha))
        + 2 * a_max * g0 * kappa * eps
        + 4 * zeta_l1(levy, reach)
    )
    return horizon * per_time


GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def gauss_mean(f: ArrayFn, lo: Any, hi: Any) -> np.ndarray:
    """15-point Gauss-Legendre mean of f over each [lo[i], hi[i]].

    f receives an array of shape (len(lo), 15) of nodes.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * GL_NODES
    return 0.5 * (np.asarray(f(nodes), dtype=float) @ GL_WEIGHTS)
