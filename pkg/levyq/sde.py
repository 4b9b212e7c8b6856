"""dX = m(t, X_-) dxi driven by a truncated subordinator, and its change of measure.

With H(s, x) = x/m(s, xi_{s-}), the pair (X, xi) under P has the law of
(xi, xi^H) under the measure with density M^H.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from levyq.density import log_density_field
from levyq.levy_core import KernelSection, LevyDensity
from levyq.simulate import JumpPath
from levyq.types import CoefficientSpec, ConfigError, LogDensity

logger = logging.getLogger(__name__)

CoefficientFn = Callable[[Any, Any], Any]


@dataclass(frozen=True, eq=False)
class Coefficient:
    """m(t, x) with 0 < m_lo <= m <= m_hi and Lipschitz constant in x."""

    m: CoefficientFn
    m_lo: float
    m_hi: float
    lipschitz: float
    time_dependent: bool = False
    state_dependent: bool = True
    name: str = "custom"

    def __post_init__(self) -> None:
        if not 0 < self.m_lo <= self.m_hi < math.inf:
            raise ConfigError(f"coefficient {self.name}: need 0 < m_lo <= m_hi < inf")
        if self.lipschitz < 0:
            raise ConfigError(f"coefficient {self.name}: Lipschitz constant must be nonnegative")

    def rate(self, s: Any, x: Any) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.m(s, x), dtype=float), np.broadcast_shapes(s.shape, x.shape))

    @property
    def kappa(self) -> float:
        return max(1.01, self.m_hi, 1.0 / self.m_lo)


CoefficientFactory = Callable[..., Coefficient]
COEFFICIENTS: dict[str, CoefficientFactory] = {}


def register_coefficient(name: str) -> Callable[[CoefficientFactory], CoefficientFactory]:
    def decorator(factory: CoefficientFactory) -> CoefficientFactory:
        COEFFICIENTS[name] = factory
        return factory

    return decorator


@register_coefficient("constant")
def constant_coefficient(c: float = 1.0) -> Coefficient:
    if c <= 0:
        raise ConfigError(f"constant coefficient needs c > 0, got {c}")
    return Coefficient(
        m=lambda s, x: np.full_like(x, c),
        m_lo=c,
        m_hi=c,
        lipschitz=0.0,
        state_dependent=False,
        name=f"constant(c={c:g})",
    )


@register_coefficient("rational_decay")
def rational_decay_coefficient() -> Coefficient:
    """m = (1 + x)/(1 + 2x) = 1/(1 + x/(1 + x)), decreasing from 1 to 1/2."""
    return Coefficient(
        m=lambda s, x: (1 + x) / (1 + 2 * x),
        m_lo=0.5,
        m_hi=1.0,
        lipschitz=1.0,
        name="rational_decay",
    )


@register_coefficient("time_periodic")
def time_periodic_coefficient(c: float = 1.0, amp: float = 0.5) -> Coefficient:
    """m = c (1 + amp sin(2 pi t)), state independent."""
    if c <= 0 or not abs(amp) < 1:
        raise ConfigError(f"time_periodic coefficient needs c > 0 and |amp| < 1, got c={c}, amp={amp}")
    a = abs(amp)
    return Coefficient(
        m=lambda s, x: c * (1 + amp * np.sin(2 * np.pi * s)) * np.ones_like(x),
        m_lo=c * (1 - a),
        m_hi=c * (1 + a),
        lipschitz=0.0,
        time_dependent=True,
        state_dependent=False,
        name=f"time_periodic(c={c:g}, amp={amp:g})",
    )


def coefficient_from_spec(spec: CoefficientSpec) -> Coefficient:
    factory = COEFFICIENTS.get(spec.name)
    if factory is None:
        raise ConfigError(f"unknown coefficient {spec.name!r}; known: {', '.join(sorted(COEFFICIENTS))}")
    try:
        return factory(**spec.params)
    except TypeError as e:
        raise ConfigError(f"coefficient {spec.name!r}: {e}") from e


@dataclass(frozen=True)
class CoefficientReport:
    name: str
    m_min: float
    m_max: float
    lipschitz_ratio: float
    m_lo: float
    m_hi: float
    lipschitz: float

    @property
    def bounds_ok(self) -> bool:
        return self.m_lo * (1 - 1e-12) <= self.m_min and self.m_max <= self.m_hi * (1 + 1e-12)

    @property
    def lipschitz_ok(self) -> bool:
        return self.lipschitz_ratio <= self.lipschitz * (1 + 1e-9) + 1e-12

    @property
    def ok(self) -> bool:
        return self.bounds_ok and self.lipschitz_ok

    @property
    def message(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if not self.bounds_ok:
            parts.append(f"m ranges over [{self.m_min:.4g}, {self.m_max:.4g}], declared [{self.m_lo:g}, {self.m_hi:g}]")
        if not self.lipschitz_ok:
            parts.append(f"Lipschitz ratio {self.lipschitz_ratio:.4g} > {self.lipschitz:g}")
        return "; ".join(parts)


def validate_coefficient(
    coef: Coefficient, times: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0), x_max: float = 20.0
) -> CoefficientReport:
    """Check declared bounds and Lipschitz constant on a grid. Never raises."""
    xs = np.linspace(0.0, x_max, 401)
    m_min, m_max, ratio = math.inf, -math.inf, 0.0
    for s in times:
        ms = coef.rate(s, xs)
        if not np.all(np.isfinite(ms)):
            return CoefficientReport(coef.name, -math.inf, math.inf, math.inf, coef.m_lo, coef.m_hi, coef.lipschitz)
        m_min = min(m_min, float(ms.min()))
        m_max = max(m_max, float(ms.max()))
        ratio = max(ratio, float(np.max(np.abs(np.diff(ms)) / np.diff(xs))))
    return CoefficientReport(coef.name, m_min, m_max, ratio, coef.m_lo, coef.m_hi, coef.lipschitz)


def solve_sde(path: JumpPath, coef: Coefficient) -> JumpPath:
    """Exact jump recursion X_{s_i} = X_{s_i-} + m(s_i, X_{s_i-}) dxi_{s_i}."""
    if not coef.state_dependent:
        sizes = coef.rate(path.times, np.zeros_like(path.sizes)) * path.sizes
    else:
        sizes = np.empty_like(path.sizes)
        x = 0.0
        for i, (s, dxi) in enumerate(zip(path.times.tolist(), path.sizes.tolist())):
            sizes[i] = float(coef.rate(s, x)) * dxi
            x += sizes[i]
    return path.with_sizes(np.asarray(sizes, dtype=float), path.truncation * coef.m_lo)


def transformed_driver(path: JumpPath, coef: Coefficient) -> JumpPath:
    """xi^H with H(s, x) = x/m(s, xi_{s-})."""
    sizes = path.sizes / coef.rate(path.times, path.left_values)
    return path.with_sizes(np.asarray(sizes, dtype=float), path.truncation / coef.m_hi)


def recover_driver(driver_h: JumpPath, coef: Coefficient) -> JumpPath:
    """Invert transformed_driver: d xi = m(t, xi_-) d xi^H is the same recursion as solve_sde."""
    recovered = solve_sde(driver_h, coef)
    return recovered.with_sizes(recovered.sizes, driver_h.truncation * coef.m_hi)


@dataclass(frozen=True)
class CoefficientField:
    """Section field H(s, x) = x/m(s, state), h = 1/m(s, state)."""

    coef: Coefficient
    alpha: float = 0.9

    @property
    def kappa(self) -> float:
        return self.coef.kappa

    @property
    def time_dependent(self) -> bool:
        return self.coef.time_dependent

    @property
    def state_dependent(self) -> bool:
        return self.coef.state_dependent

    def log_rate(self, s: Any, state: Any) -> np.ndarray:
        return -np.log(self.coef.rate(s, state))

    def jump_terms(self, s: Any, left: Any, x: Any) -> tuple[np.ndarray, np.ndarray]:
        m = self.coef.rate(s, left)
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-np.log(m), np.broadcast_shapes(m.shape, x.shape)), x / m

    def section(self, s: float, state: float = 0.0) -> KernelSection:
        m = float(self.coef.rate(s, state))
        return KernelSection(
            phi=lambda x: np.asarray(x, dtype=float) / m,
            dphi=lambda x: np.full(np.shape(x), 1.0 / m),
            kappa=self.kappa,
            alpha=self.alpha,
        )


def sde_change_of_measure(
    path: JumpPath, coef: Coefficient, levy: LevyDensity, *, t: float | None = None
) -> LogDensity:
    """log M^H_t for H(s, x) = x/m(s, xi_{s-})."""
    return log_density_field(path, CoefficientField(coef), levy, t=t)
