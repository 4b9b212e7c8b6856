"""Truncated subordinator paths sampled as marked Poisson point processes."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from levyq.levy_core import (
    LevyDensity,
    TailFunction,
    integrate_F,
    inverse_tail,
    levy_integral,
    tail_mass,
    truncation_log_bound,
)
from levyq.types import LevySpec, PathHeader, SizingError

if TYPE_CHECKING:
    from levyq.transform import Kernel

logger = logging.getLogger(__name__)


def derive_seed(master: int, *keys: int) -> int:
    """64-bit seed of the substream (master, *keys)."""
    state = np.random.SeedSequence([master, *keys]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one replicate."""
    return np.random.Generator(np.random.Philox(seed))


@lru_cache(maxsize=32)
def tail_function(levy: LevyDensity) -> TailFunction:
    return TailFunction(levy)


@dataclass(frozen=True)
class JumpPath:
    """Finitely many jumps (times[i], sizes[i]) of a pure-jump nondecreasing path on [0, horizon]."""

    horizon: float
    truncation: float
    times: np.ndarray
    sizes: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        if self.times.shape != self.sizes.shape or self.times.ndim != 1:
            raise ValueError("times and sizes must be 1-d arrays of equal length")
        if self.horizon < 0 or self.truncation <= 0:
            raise ValueError("horizon must be >= 0 and truncation > 0")
        if self.times.size:
            if self.times[0] <= 0 or self.times[-1] > self.horizon:
                raise ValueError("jump times must lie in (0, horizon]")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("jump times must be strictly increasing")
            if np.any(self.sizes < self.truncation * (1 - 1e-12)):
                raise ValueError("jump sizes must be at least the truncation level")

    @property
    def count(self) -> int:
        return int(self.times.size)

    @cached_property
    def values(self) -> np.ndarray:
        """Path value right after each jump."""
        return np.cumsum(self.sizes)

    @cached_property
    def left_values(self) -> np.ndarray:
        """Path value right before each jump."""
        return np.concatenate(([0.0], self.values[:-1])) if self.count else np.empty(0)

    def jumps_upto(self, t: float) -> int:
        """Number of jumps at times <= t."""
        return int(np.searchsorted(self.times, t, side="right"))

    def value(self, t: float) -> float:
        return path_value(self, t)

    def with_sizes(self, sizes: np.ndarray, truncation: float) -> JumpPath:
        return dataclasses.replace(self, sizes=np.asarray(sizes, dtype=float), truncation=truncation)


def path_value(path: JumpPath, t: float) -> float:
    """xi_t: sum of the jumps at times <= t."""
    if not 0 <= t <= path.horizon:
        raise ValueError(f"t={t} outside [0, {path.horizon}]")
    idx = path.jumps_upto(t)
    return float(path.values[idx - 1]) if idx else 0.0


def _untie(times: np.ndarray) -> np.ndarray:
    """Move colliding sorted times forward by one ulp."""
    for i in np.flatnonzero(np.diff(times) <= 0):
        if times[i + 1] <= times[i]:
            times[i + 1] = np.nextafter(times[i], math.inf)
    return times


def _merge(times: np.ndarray, sizes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(times, kind="stable")
    return _untie(times[order]), sizes[order]


def sample_jump_path(
    levy: LevyDensity,
    horizon: float,
    eps: float,
    seed: int,
    *,
    max_jumps: float = 1e7,
) -> JumpPath:
    """Sample the jumps of size >= eps on (0, horizon].

    Count ~ Poisson(horizon nu_bar(eps)); sizes by inverse tail; times uniform.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if horizon == 0:
        return JumpPath(0.0, eps, np.empty(0), np.empty(0), seed)

    tail = tail_function(levy)
    rate = tail_mass(tail, eps)
    mean = horizon * rate
    if mean > max_jumps:
        raise SizingError(
            f"eps={eps:g} gives {mean:.3g} expected jumps on [0, {horizon:g}], "
            f"above the budget of {max_jumps:.3g}; raise eps or max_jumps"
        )

    rng = make_rng(seed)
    count = int(rng.poisson(mean))
    u = (1.0 - rng.random(count)) * rate
    sizes = np.maximum(np.atleast_1d(inverse_tail(tail, u)), eps) if count else np.empty(0)
    times = horizon * (1.0 - rng.random(count))
    times, sizes = _merge(times, sizes)
    return JumpPath(horizon, eps, times, sizes, seed)


def refine_jump_path(path: JumpPath, levy: LevyDensity, new_eps: float, seed: int) -> JumpPath:
    """Add the jumps with sizes in [new_eps, path.truncation) from an independent substream.

    The union is distributed as a path truncated at new_eps and shares every
    jump of the coarser path.
    """
    if not 0 < new_eps < path.truncation:
        raise ValueError("new_eps must lie in (0, path.truncation)")
    if path.horizon == 0:
        return dataclasses.replace(path, truncation=new_eps)
    tail = tail_function(levy)
    top = tail_mass(tail, path.truncation)
    band = tail_mass(tail, new_eps) - top
    rng = make_rng(seed)
    count = int(rng.poisson(path.horizon * band))
    u = top + (1.0 - rng.random(count)) * band
    extra = np.atleast_1d(inverse_tail(tail, u)) if count else np.empty(0)
    extra = np.clip(extra, new_eps, path.truncation)
    extra_times = path.horizon * (1.0 - rng.random(count))
    times, sizes = _merge(np.concatenate((path.times, extra_times)), np.concatenate((path.sizes, extra)))
    return JumpPath(path.horizon, new_eps, times, sizes, path.seed)


@dataclass(frozen=True)
class SmallJumpReport:
    dropped_mass: float
    dropped_log_factor: float
    log_factor_bound: float


def small_jump_diagnostics(
    levy: LevyDensity,
    eps: float,
    horizon: float,
    kernel: Kernel | None = None,
    a: float = 0.0,
    s: float = 0.0,
) -> SmallJumpReport:
    """What truncation at eps leaves out.

    dropped_mass = horizon * int_0^eps x g; with a kernel, dropped_log_factor =
    horizon * int_0^eps |F| g for the section H(s, .) and the analytic
    bound valid for every section with the kernel's (kappa, alpha).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    mass, _ = levy_integral(levy, lambda x: x, upper=eps)
    if kernel is None:
        return SmallJumpReport(horizon * mass, 0.0, 0.0)
    section = kernel.section(s)
    dropped = integrate_F(levy, section, a, upper=eps).absolute
    bound = truncation_log_bound(levy, kernel.kappa, kernel.alpha, a, eps, horizon)
    return SmallJumpReport(horizon * mass, horizon * dropped, bound)


def save_path(path: JumpPath, csv_path: str | Path, levy: LevySpec | None = None) -> None:
    """Write (time, size) rows plus a JSON header next to them for replay."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "size"])
        for t, x in zip(path.times.tolist(), path.sizes.tolist()):
            writer.writerow([repr(t), repr(x)])
    header = PathHeader(
        levy=levy, horizon=path.horizon, truncation=path.truncation, seed=path.seed, count=path.count
    )
    csv_path.with_suffix(".json").write_text(header.model_dump_json(indent=2))


def load_path(csv_path: str | Path) -> tuple[JumpPath, PathHeader]:
    csv_path = Path(csv_path)
    header = PathHeader.model_validate_json(csv_path.with_suffix(".json").read_text())
    with csv_path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    times = np.array([float(r["time"]) for r in rows])
    sizes = np.array([float(r["size"]) for r in rows])
    return JumpPath(header.horizon, header.truncation, times, sizes, header.seed), header
