"""Radon-Nikodym log-densities of transformed subordinators.

Every density here is a Doleans exponential of F(s, x) = h g(H)/g e^{-lambda H} - 1:
a deterministic compensator over [0, t] plus a sum of log(1 + F) over the
retained jumps. The compensator is integrated piecewise between jump times,
exactly when the integrand is constant there and with Gauss-Legendre panels
otherwise.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from levyq.levy_core import (
    GL_NODES,
    GL_WEIGHTS,
    LevyDensity,
    gauss_mean,
    laplace_exponent,
    levy_integral,
    truncation_log_bound,
)
from levyq.simulate import JumpPath
from levyq.transform import (
    CompositionField,
    JumpWiseField,
    Kernel,
    Mode,
    SectionField,
    kernel_increment,
    kernel_primitive,
)
from levyq.types import DensityDomainError, LambdaSpec, LogDensity

logger = logging.getLogger(__name__)

# Panel width for Gauss quadrature of time-dependent integrands.
_PANEL = 0.25


@dataclass(frozen=True)
class CadlagStep:
    """Right-continuous step function: values[i] on [breakpoints[i-1], breakpoints[i])."""

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("a step function needs one more value than breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> CadlagStep:
        return cls((), (float(value),))

    @classmethod
    def from_spec(cls, spec: LambdaSpec) -> CadlagStep:
        return cls(tuple(spec.breakpoints), tuple(spec.values))

    def __call__(self, s: Any) -> Any:
        idx = np.searchsorted(np.asarray(self.breakpoints, dtype=float), s, side="right")
        out = np.asarray(self.values, dtype=float)[idx]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    @property
    def sup(self) -> float:
        return max(self.values)

    def pieces(self, lo: float, hi: float) -> list[tuple[float, float, float]]:
        """(a, b, value) for the constant pieces covering [lo, hi]."""
        cuts = [lo, *(b for b in self.breakpoints if lo < b < hi), hi]
        return [(a, b, float(self(a))) for a, b in zip(cuts, cuts[1:]) if b > a]

    def integrate(self, f: Callable[[float], float], lo: float, hi: float) -> float:
        """int_lo^hi f(step(s)) ds."""
        return sum(f(v) * (b - a) for a, b, v in self.pieces(lo, hi))


_ZERO = CadlagStep()


def _check_t(path: JumpPath, t: float | None) -> float:
    t = path.horizon if t is None else t
    if not 0 <= t <= path.horizon:
        raise ValueError(f"t={t} outside [0, {path.horizon}]")
    return t


def _intervals(
    path: JumpPath, t: float, time_dependent: bool, extra_cuts: Iterable[float] = ()
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intervals of [0, t] between jumps (and extra cuts) with the state held on each."""
    m = path.jumps_upto(t)
    cuts = [0.0, t, *path.times[:m].tolist(), *(c for c in extra_cuts if 0 < c < t)]
    if time_dependent:
        cuts.extend(np.arange(_PANEL, t, _PANEL).tolist())
    edges = np.unique(np.asarray(cuts, dtype=float))
    starts, ends = edges[:-1], edges[1:]
    idx = np.searchsorted(path.times[:m], starts, side="right")
    states = np.concatenate(([0.0], path.values[:m]))[idx]
    return starts, ends, states


def field_compensator(field: SectionField, levy: LevyDensity, path: JumpPath, t: float) -> float:
    """g0 int_0^t log h(s, 0) ds with h read at the state held on each interval."""
    starts, ends, states = _intervals(path, t, field.time_dependent)
    if starts.size == 0:
        return 0.0
    if field.time_dependent:
        means = gauss_mean(lambda nodes: field.log_rate(nodes, states[:, None]), starts, ends)
    else:
        means = field.log_rate(starts, states)
    return levy.g0 * float(np.sum(means * (ends - starts)))


def _jump_window(path: JumpPath, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = path.jumps_upto(t)
    return path.times[:m], path.left_values[:m], path.sizes[:m]


def transformed_increments(path: JumpPath, field: SectionField, t: float | None = None) -> np.ndarray:
    """Jump sizes of xi^H up to t."""
    s, left, x = _jump_window(path, _check_t(path, t))
    _, H = field.jump_terms(s, left, x)
    return H


def log_density_field(
    path: JumpPath,
    field: SectionField,
    levy: LevyDensity,
    lam: CadlagStep | None = None,
    *,
    t: float | None = None,
    truncation_bound: float | None = None,
) -> LogDensity:
    """log M^{H,lambda}_t on a truncated path for any section field."""
    t = _check_t(path, t)
    lam = lam or _ZERO
    s, left, x = _jump_window(path, t)
    log_h, H = field.jump_terms(s, left, x)
    log_factors = log_h + levy.log_ratio(H, x) - lam(s) * H

    compensator = field_compensator(field, levy, path, t)
    if not lam.is_zero:
        compensator += lam.integrate(lambda v: laplace_exponent(levy, v), 0.0, t)
    if truncation_bound is None:
        truncation_bound = truncation_log_bound(levy, field.kappa, field.alpha, lam.sup, path.truncation, t)
    return LogDensity(
        compensator=compensator,
        jump_sum=float(np.sum(log_factors)),
        truncation_bound=truncation_bound,
    )


def _require_mode(kernel: Kernel, mode: Mode) -> None:
    if kernel.mode is not mode:
        raise ValueError(f"kernel {kernel.name} is in {kernel.mode.value} mode, expected {mode.value}")


def log_density_jump(path: JumpPath, kernel: Kernel, levy: LevyDensity, *, t: float | None = None) -> LogDensity:
    """exp(g0 int log k(s,0) ds) prod k(s,x) g(K(s,x))/g(x) over the jumps up to t."""
    _require_mode(kernel, Mode.JUMP)
    return log_density_field(path, JumpWiseField(kernel), levy, t=t)


def log_density_composition(
    path: JumpPath, kernel: Kernel, levy: LevyDensity, *, t: float | None = None
) -> LogDensity:
    """exp(g0 int log k(s, xi_s) ds) prod k(s, xi_s) g(K(s,xi_s) - K(s,xi_s-))/g(dxi_s)."""
    _require_mode(kernel, Mode.COMPOSITION)
    return log_density_field(path, CompositionField(kernel), levy, t=t)


def log_density_tilted(
    path: JumpPath, kernel: Kernel, levy: LevyDensity, lam: CadlagStep, *, t: float | None = None
) -> LogDensity:
    """Exponentially tilted density; the kernel's mode picks the section field."""
    return log_density_field(path, kernel.field(), levy, lam, t=t)


def _require_closed_form(levy: LevyDensity) -> None:
    if not levy.closed_form:
        raise ValueError("the gamma form needs a gamma or tempered_log density")


def log_density_jump_gamma(
    path: JumpPath, kernel: Kernel, levy: LevyDensity, *, t: float | None = None
) -> LogDensity:
    """Jump-wise density written as exp(b(xi_t - sum K) + g0 int log k(s,0) ds) prod k x/K."""
    _require_mode(kernel, Mode.JUMP)
    _require_closed_form(levy)
    t = _check_t(path, t)
    s, _, x = _jump_window(path, t)
    K = np.asarray(kernel_primitive(kernel, s, x), dtype=float)
    log_k = np.log(kernel.rate(s, x))
    field = JumpWiseField(kernel)
    compensator = field_compensator(field, levy, path, t) + levy.rate * (float(np.sum(x)) - float(np.sum(K)))
    return LogDensity(
        compensator=compensator,
        jump_sum=float(np.sum(log_k + np.log(x) - np.log(K))),
        truncation_bound=truncation_log_bound(levy, kernel.kappa, kernel.alpha, 0.0, path.truncation, t),
    )


def log_density_composition_gamma(
    path: JumpPath, kernel: Kernel, levy: LevyDensity, *, t: float | None = None
) -> LogDensity:
    """Composition density written as exp(b(xi_t - K(t, xi_t)) + g0 int log k(s, xi_s) ds) prod k x/dK.

    For time-dependent kernels K(t, xi_t) is replaced by the sum of the increments.
    """
    _require_mode(kernel, Mode.COMPOSITION)
    _require_closed_form(levy)
    t = _check_t(path, t)
    s, left, x = _jump_window(path, t)
    right = left + x
    incr = np.asarray(kernel_increment(kernel, s, left, x), dtype=float)
    log_k = np.log(kernel.rate(s, right))
    xi_t = float(right[-1]) if right.size else 0.0
    if kernel.time_dependent:
        total = float(np.sum(incr))
    else:
        total = float(kernel_primitive(kernel, 0.0, xi_t))
    field = CompositionField(kernel)
    compensator = field_compensator(field, levy, path, t) + levy.rate * (xi_t - total)
    return LogDensity(
        compensator=compensator,
        jump_sum=float(np.sum(log_k + np.log(x) - np.log(incr))),
        truncation_bound=truncation_log_bound(levy, kernel.kappa, kernel.alpha, 0.0, path.truncation, t),
    )


# Doleans exponential engine


@dataclass(frozen=True)
class DoleansIntegrand:
    """F(s, state, x) = h g(H)/g e^{-lambda(s) H} - 1 for a section field."""

    field: SectionField
    levy: LevyDensity
    lam: CadlagStep = _ZERO

    @property
    def time_dependent(self) -> bool:
        return self.field.time_dependent

    @property
    def state_dependent(self) -> bool:
        return self.field.state_dependent

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return self.lam.breakpoints

    def time_key(self, s: float) -> float:
        """Identifies the section at time s for caching the compensator rate."""
        return s if self.time_dependent else float(self.lam(s))

    def __call__(self, s: Any, state: Any, x: Any) -> Any:
        log_h, H = self.field.jump_terms(s, state, x)
        return np.expm1(log_h + self.levy.log_ratio(H, x) - self.lam(s) * H)


@dataclass(frozen=True)
class _PlainIntegrand:
    f: Callable[[Any, Any], Any]
    time_dependent: bool = True
    state_dependent: bool = False
    breakpoints: tuple[float, ...] = ()

    def time_key(self, s: float) -> float:
        return s

    def __call__(self, s: Any, state: Any, x: Any) -> Any:
        return self.f(s, x)


def doleans_integrand(field: SectionField, levy: LevyDensity, lam: CadlagStep | None = None) -> DoleansIntegrand:
    return DoleansIntegrand(field, levy, lam or _ZERO)


@dataclass(frozen=True)
class DoleansPath:
    """x^F and E^F right after each retained jump, and at t."""

    jump_times: np.ndarray
    x_F: np.ndarray
    E_F: np.ndarray
    x_F_t: float
    log_E_t: float
    residual: float

    @property
    def E_t(self) -> float:
        return math.exp(self.log_E_t)


def doleans_evaluate(
    F: DoleansIntegrand | Callable[[Any, Any], Any],
    path: JumpPath,
    levy: LevyDensity,
    *,
    t: float | None = None,
) -> DoleansPath:
    """Build x^F_t = sum F(s, dxi_s) - int ds int F(s, x) g(x) dx and its Doleans exponential.

    F is either a DoleansIntegrand or a plain function F(s, x) with F(s, 0) = 0.
    The compensator rate is computed by quadrature; the residual is that of
    E_t = 1 + int E_{s-} dx^F_s evaluated jump by jump.
    """
    t = _check_t(path, t)
    integrand: Any = F if isinstance(F, DoleansIntegrand) else _PlainIntegrand(F)
    starts, ends, states = _intervals(path, t, integrand.time_dependent, integrand.breakpoints)

    rate_cache: dict[tuple[float, float], float] = {}

    def rate(s: float, state: float) -> float:
        key = (integrand.time_key(s), state if integrand.state_dependent else 0.0)
        if key not in rate_cache:
            value, _ = levy_integral(levy, lambda x: float(integrand(s, state, x)))
            rate_cache[key] = value
        return rate_cache[key]

    widths = ends - starts
    C = np.empty(starts.size)
    for j, (a, w, v) in enumerate(zip(starts, widths, states)):
        if integrand.time_dependent:
            nodes = a + 0.5 * w * (GL_NODES + 1.0)
            C[j] = 0.5 * w * float(np.dot(GL_WEIGHTS, [rate(float(u), float(v)) for u in nodes]))
        else:
            # lambda is right-continuous, so constant on [a, b)
            C[j] = w * rate(float(a), float(v))

    s, left, x = _jump_window(path, t)
    f = np.asarray(integrand(s, left, x), dtype=float) if s.size else np.empty(0)
    if f.size and np.min(f) <= -1:
        raise DensityDomainError(f"F = {np.min(f):.6g} <= -1 at a retained jump")

    jump_at = np.searchsorted(s, ends, side="left")
    is_jump = np.zeros(ends.size, dtype=bool)
    hit = jump_at < s.size
    is_jump[hit] = s[jump_at[hit]] == ends[hit]

    log_E, E, x_F, integral = 0.0, 1.0, 0.0, 0.0
    rec_x, rec_E = [], []
    for j in range(starts.size):
        integral += E * math.expm1(-C[j])
        log_E -= C[j]
        x_F -= C[j]
        E = math.exp(log_E)
        if is_jump[j]:
            fi = float(f[jump_at[j]])
            integral += E * fi
            log_E += math.log1p(fi)
            x_F += fi
            E = math.exp(log_E)
            rec_x.append(x_F)
            rec_E.append(E)
    residual = abs(E - 1.0 - integral)
    return DoleansPath(s.copy(), np.asarray(rec_x), np.asarray(rec_E), x_F, log_E, residual)


def write_log_densities(records: Iterable[LogDensity], path: str | Path) -> int:
    """One JSON record per line; returns the record count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w") as fh:
        for record in records:
            fh.write(record.model_dump_json() + "\n")
            count += 1
    return count
