"""Transformation kernels k/K/H and their action on jump paths.

A kernel k(s, x) with 1/kappa <= k <= kappa and Hoelder modulus kappa|x-y|^alpha
defines K(s, x) = int_0^x k(s, y) dy. It acts on a path either jump by jump,
H(s, x) = K(s, x), or by composition with the running value,
H(s, x) = K(s, xi_{s-} + x) - K(s, xi_{s-}).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Protocol

import numpy as np

from levyq.levy_core import KernelSection, checked_quad, gauss_mean
from levyq.simulate import JumpPath
from levyq.types import ConfigError, KernelSpec, QuadratureError

logger = logging.getLogger(__name__)

KernelFn = Callable[[Any, Any], Any]

_KAPPA_FLOOR = 1.01
_DEFAULT_ALPHA = 0.9
# quadrature primitives kept per kernel before the cache is dropped
CACHE_LIMIT = 4096


class Mode(str, Enum):
    JUMP = "jump"
    COMPOSITION = "composition"


@dataclass(frozen=True, eq=False)
class Kernel:
    """Derivative kernel k(s, x) with its (kappa, alpha) declaration."""

    k: KernelFn
    kappa: float
    alpha: float
    mode: Mode = Mode.JUMP
    primitive: KernelFn | None = None
    inverse: KernelFn | None = None
    time_dependent: bool = False
    name: str = "custom"
    cache: dict[tuple[float, float], float] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.kappa > 1:
            raise ConfigError(f"kernel {self.name}: kappa must exceed 1, got {self.kappa}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"kernel {self.name}: alpha must lie in (0, 1), got {self.alpha}")

    def rate(self, s: Any, x: Any) -> np.ndarray:
        """k(s, x) broadcast over s and x."""
        s = np.asarray(s, dtype=float)
        x = np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(s.shape, x.shape)
        return np.broadcast_to(np.asarray(self.k(s, x), dtype=float), shape)

    def K(self, s: Any, x: Any) -> Any:
        return kernel_primitive(self, s, x)

    def field(self) -> SectionField:
        if self.mode is Mode.JUMP:
            return JumpWiseField(self)
        return CompositionField(self)

    def section(self, s: float, state: float = 0.0) -> KernelSection:
        return self.field().section(s, state)


def _quad_primitive(kernel: Kernel, s: float, x: float) -> float:
    key = (s, x)
    if key not in kernel.cache:
        value, _ = checked_quad(
            lambda y: float(kernel.rate(s, y)), 0.0, x, what=f"K({s:g}, {x:g}) for {kernel.name}",
            epsrel=1e-12,
        )
        if len(kernel.cache) >= CACHE_LIMIT:
            kernel.cache.clear()
        kernel.cache[key] = value
        return value
    return kernel.cache[key]


def kernel_primitive(kernel: Kernel, s: Any, x: Any) -> Any:
    """K(s, x) = int_0^x k(s, y) dy; closed form when the kernel carries one."""
    s_arr, x_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise ValueError("K(s, x) needs x >= 0")
    if kernel.primitive is not None:
        out = np.broadcast_to(np.asarray(kernel.primitive(s_arr, x_arr), dtype=float), x_arr.shape)
    else:
        out = np.vectorize(lambda sv, xv: _quad_primitive(kernel, float(sv), float(xv)), otypes=[float])(
            s_arr, x_arr
        )
    return float(out) if out.ndim == 0 else np.array(out)


def inverse_kernel(kernel: Kernel, s: Any, y: Any, *, tol: float = 1e-12, max_iter: int = 100) -> Any:
    """J(s, y): the x with K(s, x) = y, by safeguarded Newton on [y/kappa, kappa y]."""
    s_arr, y_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(y, dtype=float))
    if np.any(y_arr < 0):
        raise ValueError("J(s, y) needs y >= 0")
    if kernel.inverse is not None:
        out = np.broadcast_to(np.asarray(kernel.inverse(s_arr, y_arr), dtype=float), y_arr.shape)
        return float(out) if out.ndim == 0 else np.array(out)

    lo = y_arr / kernel.kappa
    hi = y_arr * kernel.kappa
    x = np.clip(y_arr, lo, hi)
    target = tol * np.maximum(1.0, y_arr)
    for _ in range(max_iter):
        resid = np.asarray(kernel_primitive(kernel, s_arr, x)) - y_arr
        done = np.abs(resid) <= target
        if np.all(done):
            break
        hi = np.where(resid > 0, x, hi)
        lo = np.where(resid < 0, x, lo)
        step = x - resid / kernel.rate(s_arr, x)
        step = np.where((step > lo) & (step < hi), step, 0.5 * (lo + hi))
        x = np.where(done, x, step)
    else:
        raise QuadratureError(f"inverse of K for {kernel.name} did not converge", float(np.max(np.abs(resid))))
    return float(x) if x.ndim == 0 else x


def kernel_increment(kernel: Kernel, s: Any, left: Any, width: Any) -> Any:
    """K(s, left + width) - K(s, left), without cancellation for narrow widths.

    The width is taken as given, so a jump below one ulp of `left` keeps its size.
    """
    s_arr, left_arr, width_arr = np.broadcast_arrays(
        np.asarray(s, dtype=float), np.asarray(left, dtype=float), np.asarray(width, dtype=float)
    )
    if np.any(width_arr < 0) or np.any(left_arr < 0):
        raise ValueError("K increments need left >= 0 and width >= 0")
    right = left_arr + width_arr
    narrow = width_arr < 1e-3 * np.maximum(1.0, right)
    out = np.empty(width_arr.shape)
    if np.any(narrow):
        s_n = s_arr[narrow]
        out[narrow] = width_arr[narrow] * gauss_mean(
            lambda nodes: kernel.rate(s_n[:, None], nodes), left_arr[narrow], right[narrow]
        )
    wide = ~narrow
    if np.any(wide):
        out[wide] = np.asarray(kernel_primitive(kernel, s_arr[wide], right[wide])) - np.asarray(
            kernel_primitive(kernel, s_arr[wide], left_arr[wide])
        )
    return float(out) if out.ndim == 0 else out


def apply_jump_transform(path: JumpPath, kernel: Kernel) -> JumpPath:
    """xi^H with H(s, x) = K(s, x): same times, sizes K(s_i, x_i)."""
    if kernel.mode is not Mode.JUMP:
        raise ValueError("apply_jump_transform needs a jump-mode kernel")
    sizes = np.asarray(kernel_primitive(kernel, path.times, path.sizes), dtype=float)
    return path.with_sizes(sizes, path.truncation / kernel.kappa)


def invert_jump_transform(path: JumpPath, kernel: Kernel) -> JumpPath:
    """Undo apply_jump_transform: sizes J(s_i, y_i)."""
    sizes = np.asarray(inverse_kernel(kernel, path.times, path.sizes), dtype=float)
    return path.with_sizes(sizes, path.truncation * kernel.kappa)


def apply_composition(path: JumpPath, kernel: Kernel) -> JumpPath:
    """xi^H with H(s, x) = K(s, xi_{s-} + x) - K(s, xi_{s-}).

    For kernels without time dependence the partial sums telescope to K(xi_t).
    """
    if kernel.mode is not Mode.COMPOSITION:
        raise ValueError("apply_composition needs a composition-mode kernel")
    sizes = np.asarray(kernel_increment(kernel, path.times, path.left_values, path.sizes), dtype=float)
    return path.with_sizes(sizes, path.truncation / kernel.kappa)


@dataclass(frozen=True)
class KernelGrid:
    times: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    x_max: float = 10.0
    points: int = 201


@dataclass(frozen=True)
class KernelReport:
    name: str
    kappa: float
    alpha: float
    k_min: float
    k_max: float
    holder_ratio: float
    primitive_error: float

    @property
    def lower_ok(self) -> bool:
        return self.k_min >= (1 - 1e-12) / self.kappa

    @property
    def upper_ok(self) -> bool:
        return self.k_max <= self.kappa * (1 + 1e-12)

    @property
    def holder_ok(self) -> bool:
        return self.holder_ratio <= self.kappa * (1 + 1e-9)

    @property
    def primitive_ok(self) -> bool:
        return self.primitive_error <= 1e-8

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok and self.holder_ok and self.primitive_ok

    @property
    def message(self) -> str:
        if self.ok:
            return "ok"
        parts = []
        if not self.lower_ok:
            parts.append(f"min k = {self.k_min:.4g} < 1/kappa")
        if not self.upper_ok:
            parts.append(f"max k = {self.k_max:.4g} > kappa")
        if not self.holder_ok:
            parts.append(f"Hoelder ratio {self.holder_ratio:.4g} > kappa")
        if not self.primitive_ok:
            parts.append(f"closed-form K off by {self.primitive_error:.3g}")
        return "; ".join(parts)


def validate_kernel(kernel: Kernel, grid: KernelGrid | None = None) -> KernelReport:
    """Check the (kappa, alpha) declaration and any closed-form K on a grid. Never raises."""
    grid = grid or KernelGrid()
    xs = np.unique(np.concatenate((np.linspace(0.0, grid.x_max, grid.points), np.geomspace(1e-8, 1.0, 41))))
    dx = np.abs(xs[:, None] - xs[None, :])
    off = dx > 0
    k_min, k_max, ratio, prim_err = math.inf, -math.inf, 0.0, 0.0
    for s in grid.times:
        ks = kernel.rate(s, xs)
        if not np.all(np.isfinite(ks)):
            return KernelReport(kernel.name, kernel.kappa, kernel.alpha, -math.inf, math.inf, math.inf, 0.0)
        k_min = min(k_min, float(ks.min()))
        k_max = max(k_max, float(ks.max()))
        dk = np.abs(ks[:, None] - ks[None, :])
        ratio = max(ratio, float(np.max(dk[off] / dx[off] ** kernel.alpha)))
        if kernel.primitive is not None:
            pieces = (xs[1:] - xs[:-1]) * gauss_mean(lambda nodes, s=s: kernel.rate(s, nodes), xs[:-1], xs[1:])
            exact = np.concatenate(([0.0], np.cumsum(pieces)))
            closed = np.asarray(kernel_primitive(kernel, s, xs))
            prim_err = max(prim_err, float(np.max(np.abs(closed - exact) / np.maximum(1.0, np.abs(exact)))))
    return KernelReport(kernel.name, kernel.kappa, kernel.alpha, k_min, k_max, ratio, prim_err)


# Registry

KernelFactory = Callable[..., Kernel]
KERNELS: dict[str, KernelFactory] = {}


def register_kernel(name: str) -> Callable[[KernelFactory], KernelFactory]:
    """Decorator adding a kernel factory under name; factories take the spec params as keywords."""

    def decorator(factory: KernelFactory) -> KernelFactory:
        if name in KERNELS:
            logger.debug("Replacing kernel factory %s", name)
        KERNELS[name] = factory
        return factory

    return decorator


def _kappa(*bounds: float) -> float:
    return max((_KAPPA_FLOOR, *bounds))


@register_kernel("identity")
def identity_kernel() -> Kernel:
    return Kernel(
        k=lambda s, x: np.ones_like(x),
        kappa=_kappa(),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: x,
        inverse=lambda s, y: y,
        name="identity",
    )


@register_kernel("linear")
def linear_kernel(c: float = 2.0) -> Kernel:
    """k = c, K = c x."""
    if c <= 0:
        raise ConfigError(f"linear kernel needs c > 0, got {c}")
    return Kernel(
        k=lambda s, x: np.full_like(x, c),
        kappa=_kappa(c, 1 / c),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: c * x,
        inverse=lambda s, y: y / c,
        name=f"linear(c={c:g})",
    )


@register_kernel("damped_exp")
def damped_exp_kernel(a: float = 1.0, b: float = 0.5) -> Kernel:
    """k = a + b exp(-x), K = a x + b (1 - exp(-x))."""
    lo, hi = min(a, a + b), max(a, a + b)
    if a <= 0 or lo <= 0:
        raise ConfigError(f"damped_exp kernel needs a > 0 and a + b > 0, got a={a}, b={b}")
    return Kernel(
        k=lambda s, x: a + b * np.exp(-x),
        kappa=_kappa(hi, 1 / lo, abs(b)),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: a * x - b * np.expm1(-x),
        name=f"damped_exp(a={a:g}, b={b:g})",
    )


@register_kernel("cosine_bump")
def cosine_bump_kernel(amp: float = 0.5) -> Kernel:
    """k = 1 + amp cos(pi x); K(s, 1) = 1, so K maps [0, 1] onto itself."""
    if not abs(amp) < 1:
        raise ConfigError(f"cosine_bump kernel needs |amp| < 1, got {amp}")
    a = abs(amp)
    return Kernel(
        k=lambda s, x: 1 + amp * np.cos(np.pi * x),
        kappa=_kappa(1 + a, 1 / (1 - a), math.pi * a),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: x + amp * np.sin(np.pi * x) / np.pi,
        name=f"cosine_bump(amp={amp:g})",
    )


@register_kernel("rational")
def rational_kernel(b: float = 1.0) -> Kernel:
    """k = 1 + b/(1 + x), K = x + b log(1 + x)."""
    if b <= -1:
        raise ConfigError(f"rational kernel needs b > -1, got {b}")
    lo, hi = min(1.0, 1 + b), max(1.0, 1 + b)
    return Kernel(
        k=lambda s, x: 1 + b / (1 + x),
        kappa=_kappa(hi, 1 / lo, abs(b)),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: x + b * np.log1p(x),
        name=f"rational(b={b:g})",
    )


@register_kernel("time_modulated")
def time_modulated_kernel(c: float = 1.0, amp: float = 0.5) -> Kernel:
    """k = c (1 + amp sin(2 pi s)), constant in x."""
    if c <= 0 or not abs(amp) < 1:
        raise ConfigError(f"time_modulated kernel needs c > 0 and |amp| < 1, got c={c}, amp={amp}")
    a = abs(amp)

    def level(s: Any) -> Any:
        return c * (1 + amp * np.sin(2 * np.pi * s))

    return Kernel(
        k=lambda s, x: level(s) * np.ones_like(x),
        kappa=_kappa(c * (1 + a), 1 / (c * (1 - a))),
        alpha=_DEFAULT_ALPHA,
        primitive=lambda s, x: level(s) * x,
        inverse=lambda s, y: y / level(s),
        time_dependent=True,
        name=f"time_modulated(c={c:g}, amp={amp:g})",
    )


def normalized_kernel(kernel: Kernel) -> Kernel:
    """k(s, x)/K(s, 1), so that K(s, .) maps [0, 1] onto itself."""
    if kernel.time_dependent:

        def scale(s: Any) -> Any:
            s = np.asarray(s, dtype=float)
            return np.asarray(kernel_primitive(kernel, s, np.ones_like(s)))

        kappa = kernel.kappa**2
    else:
        c = float(kernel_primitive(kernel, 0.0, 1.0))

        def scale(s: Any) -> Any:
            return c

        kappa = max(kernel.kappa * c, kernel.kappa / c)

    return Kernel(
        k=lambda s, x: kernel.rate(s, x) / scale(s),
        kappa=_kappa(kappa),
        alpha=kernel.alpha,
        mode=kernel.mode,
        primitive=lambda s, x: np.asarray(kernel_primitive(kernel, s, x)) / scale(s),
        inverse=lambda s, y: inverse_kernel(kernel, s, y * scale(s)),
        time_dependent=kernel.time_dependent,
        name=f"{kernel.name}:normalized",
    )


def kernel_from_spec(spec: KernelSpec) -> Kernel:
    """Build a kernel from the registry, applying declared (kappa, alpha), mode and normalization."""
    factory = KERNELS.get(spec.name)
    if factory is None:
        raise ConfigError(f"unknown kernel {spec.name!r}; known: {', '.join(sorted(KERNELS))}")
    try:
        kernel = factory(**spec.params)
    except TypeError as e:
        raise ConfigError(f"kernel {spec.name!r}: {e}") from e
    overrides: dict[str, Any] = {"mode": Mode(spec.mode), "cache": {}}
    if spec.kappa is not None:
        overrides["kappa"] = spec.kappa
    if spec.alpha is not None:
        overrides["alpha"] = spec.alpha
    kernel = dataclasses.replace(kernel, **overrides)
    return normalized_kernel(kernel) if spec.normalize else kernel


# Section fields: H(s, .) per (time, left-limit state)


class SectionField(Protocol):
    """Predictable family of sections H(s, .) indexed by time and the running state."""

    kappa: float
    alpha: float
    time_dependent: bool
    state_dependent: bool

    def log_rate(self, s: Any, state: Any) -> np.ndarray:
        """log h(s, 0) when the state is held at `state`."""
        ...

    def jump_terms(self, s: Any, left: Any, x: Any) -> tuple[np.ndarray, np.ndarray]:
        """(log h(s, x), H(s, x)) for jumps x taken from the left limit `left`."""
        ...

    def section(self, s: float, state: float) -> KernelSection: ...


@dataclass(frozen=True)
class JumpWiseField:
    kernel: Kernel
    state_dependent: bool = False

    @property
    def kappa(self) -> float:
        return self.kernel.kappa

    @property
    def alpha(self) -> float:
        return self.kernel.alpha

    @property
    def time_dependent(self) -> bool:
        return self.kernel.time_dependent

    def log_rate(self, s: Any, state: Any) -> np.ndarray:
        return np.log(self.kernel.rate(s, np.zeros_like(np.asarray(state, dtype=float))))

    def jump_terms(self, s: Any, left: Any, x: Any) -> tuple[np.ndarray, np.ndarray]:
        log_h = np.log(self.kernel.rate(s, x))
        return log_h, np.asarray(kernel_primitive(self.kernel, s, x), dtype=float)

    def section(self, s: float, state: float = 0.0) -> KernelSection:
        kernel = self.kernel
        return KernelSection(
            phi=lambda x: kernel_primitive(kernel, s, x),
            dphi=lambda x: kernel.rate(s, x),
            kappa=kernel.kappa,
            alpha=kernel.alpha,
        )


@dataclass(frozen=True)
class CompositionField:
    kernel: Kernel
    state_dependent: bool = True

    @property
    def kappa(self) -> float:
        return self.kernel.kappa

    @property
    def alpha(self) -> float:
        return self.kernel.alpha

    @property
    def time_dependent(self) -> bool:
        return self.kernel.time_dependent

    def log_rate(self, s: Any, state: Any) -> np.ndarray:
        return np.log(self.kernel.rate(s, state))

    def jump_terms(self, s: Any, left: Any, x: Any) -> tuple[np.ndarray, np.ndarray]:
        right = np.asarray(left, dtype=float) + np.asarray(x, dtype=float)
        log_h = np.log(self.kernel.rate(s, right))
        return log_h, np.asarray(kernel_increment(self.kernel, s, left, x), dtype=float)

    def section(self, s: float, state: float = 0.0) -> KernelSection:
        kernel = self.kernel
        return KernelSection(
            phi=lambda x: kernel_increment(kernel, s, state, x),
            dphi=lambda x: kernel.rate(s, state + np.asarray(x, dtype=float)),
            kappa=kernel.kappa,
            alpha=kernel.alpha,
        )
