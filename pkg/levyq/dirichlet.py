"""Dirichlet bridge D_t = gamma_t / gamma_T and its two quasi-invariance densities.

Composition D -> K(., D) carries the density L^{K,T}; transforming the jumps
D -> D^K is checked through a two-sided weighted identity with weights
built from U^K_T and from the inverse psi_D^{-1}.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Any

import numpy as np
from scipy import stats

from levyq.density import field_compensator
from levyq.levy_core import Family, LevyDensity, gauss_mean, make_levy_density
from levyq.simulate import JumpPath, derive_seed, sample_jump_path
from levyq.transform import (
    CompositionField,
    JumpWiseField,
    Kernel,
    inverse_kernel,
    kernel_primitive,
)
from levyq.types import ConfigError, LogDensity, SizingError

logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-10


@lru_cache(maxsize=1)
def unit_gamma() -> LevyDensity:
    return make_levy_density(Family.GAMMA)


@dataclass(frozen=True)
class DirichletPath:
    """Jumps d_i > 0 at times s_i in (0, T], summing to one."""

    T: float
    times: np.ndarray
    d: np.ndarray
    eps: float
    seed: int
    resamples: int = 0

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.times.shape != self.d.shape or self.times.size == 0:
            raise ValueError("a Dirichlet path needs at least one jump")
        if np.any(self.d <= 0):
            raise ValueError("normalized jumps must be positive")

    @cached_property
    def cumulative(self) -> np.ndarray:
        """D right after each jump; the last entry is exactly 1."""
        c = np.minimum(np.cumsum(self.d), 1.0)
        c[-1] = 1.0
        return c

    @cached_property
    def left_cumulative(self) -> np.ndarray:
        return np.concatenate(([0.0], self.cumulative[:-1]))

    def value(self, t: float) -> float:
        if not 0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        idx = int(np.searchsorted(self.times, t, side="right"))
        return float(self.cumulative[idx - 1]) if idx else 0.0

    def as_jump_path(self) -> JumpPath:
        return JumpPath(self.T, float(self.d.min()), self.times, self.d, self.seed)


def sample_dirichlet_path(
    T: float, eps: float, seed: int, *, max_jumps: float = 1e7, max_resamples: int = 100
) -> DirichletPath:
    """Normalize a truncated gamma path on [0, T]; empty paths are redrawn from the next substream."""
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    levy = unit_gamma()
    for attempt in range(max_resamples):
        sub = seed if attempt == 0 else derive_seed(seed, attempt)
        path = sample_jump_path(levy, T, eps, sub, max_jumps=max_jumps)
        if path.count:
            if attempt:
                logger.warning("Dirichlet path for seed %d was empty; used substream %d", seed, attempt)
            d = path.sizes / path.sizes.sum()
            return DirichletPath(T, path.times, d, eps, seed, resamples=attempt)
    raise SizingError(f"{max_resamples} empty gamma paths in a row for T={T}, eps={eps}; lower eps")


def beta_reference(t: float, T: float) -> Any:
    """Law of D_t: Beta(t, T - t)."""
    if not 0 < t < T:
        raise ValueError(f"need 0 < t < T, got t={t}, T={T}")
    return stats.beta(t, T - t)


def check_unit_interval(kernel: Kernel, T: float, points: int = 9) -> float:
    """Largest |K(s, 1) - 1| over a time grid; raises ConfigError above tolerance."""
    times = np.linspace(0.0, T, points) if kernel.time_dependent else np.zeros(1)
    err = float(np.max(np.abs(np.asarray(kernel_primitive(kernel, times, np.ones_like(times))) - 1.0)))
    if err > _UNIT_TOL:
        raise ConfigError(
            f"kernel {kernel.name} does not map [0, 1] onto itself (|K(s,1) - 1| = {err:.3g}); "
            "set normalize in the kernel spec"
        )
    return err


def log_density_bridge_composition(D: DirichletPath, kernel: Kernel, t: float) -> LogDensity:
    """log L^{K,T}_t.

    The boundary factor (1 - K(t, D_t))/(1 - D_t) is the mean of k(t, .) over
    [D_t, 1]; at t = T it is k(T, 1) raised to -1.
    """
    if not 0 < t <= D.T:
        raise ValueError(f"t={t} outside (0, {D.T}]")
    check_unit_interval(kernel, D.T)
    path = D.as_jump_path()
    field = CompositionField(kernel)
    m = path.jumps_upto(t)
    s, left, x = path.times[:m], D.left_cumulative[:m], D.d[:m]
    log_h, incr = field.jump_terms(s, left, x)
    jump_sum = float(np.sum(log_h + np.log(x) - np.log(incr)))
    compensator = field_compensator(field, unit_gamma(), path, t)

    clamped = False
    if t == D.T:
        boundary = -math.log(float(kernel.rate(D.T, 1.0)))
    else:
        D_t = D.value(t)
        if 1.0 - D_t <= 1e-300:
            clamped = True
            logger.warning("D_t = 1 before T=%g at t=%g (seed %d); boundary factor taken as k(t, 1)", D.T, t, D.seed)
        mean_k = float(gauss_mean(lambda nodes: kernel.rate(t, nodes), [D_t], [1.0])[0])
        boundary = (D.T - t - 1.0) * math.log(mean_k)
    return LogDensity(compensator=compensator + boundary, jump_sum=jump_sum, clamped=clamped)


def jump_transform_dirichlet(D: DirichletPath, kernel: Kernel) -> DirichletPath:
    """D^K: jumps K(s_i, d_i), renormalized."""
    y = np.asarray(kernel_primitive(kernel, D.times, D.d), dtype=float)
    return DirichletPath(D.T, D.times, y / y.sum(), D.eps, D.seed, D.resamples)


def psi_zeta(D: DirichletPath, kernel: Kernel, x: float) -> tuple[float, float]:
    """psi_D(x) = sum J(s_i, x d_i) and psi_D'(x) = sum d_i / k(s_i, J(s_i, x d_i))."""
    if x < 0:
        raise ValueError("psi_D needs x >= 0")
    J = np.asarray(inverse_kernel(kernel, D.times, x * D.d), dtype=float)
    return float(np.sum(J)), float(np.sum(D.d / kernel.rate(D.times, J)))


def solve_zeta(D: DirichletPath, kernel: Kernel, *, tol: float = 1e-12, max_iter: int = 100) -> tuple[float, float]:
    """z = psi_D^{-1}(1) and psi_D'(z), by safeguarded Newton on [1/kappa, kappa]."""
    lo, hi = 1.0 / kernel.kappa, kernel.kappa
    z = 1.0
    for _ in range(max_iter):
        psi, dpsi = psi_zeta(D, kernel, z)
        resid = psi - 1.0
        if abs(resid) <= tol:
            return z, dpsi
        if resid > 0:
            hi = z
        else:
            lo = z
        step = z - resid / dpsi
        z = step if lo <= step <= hi else 0.5 * (lo + hi)
    raise RuntimeError(f"Newton for psi_D^(-1)(1) did not converge (residual {resid:.3g})")


def log_density_bridge_jump(D: DirichletPath, kernel: Kernel) -> tuple[LogDensity, LogDensity]:
    """(log U^K_T on D, log[p_T(z)/p_T(1)] + log zeta_D'(1)) with z = psi_D^{-1}(1).

    E[Phi(D^K) exp(lhs)] = E[Phi(D) exp(rhs)].
    """
    T = D.T
    path = D.as_jump_path()
    K = np.asarray(kernel_primitive(kernel, D.times, D.d), dtype=float)
    log_k = np.log(kernel.rate(D.times, D.d))
    lhs = LogDensity(
        compensator=1.0 - float(np.sum(K)) + field_compensator(JumpWiseField(kernel), unit_gamma(), path, T),
        jump_sum=float(np.sum(log_k + np.log(D.d) - np.log(K))),
    )
    z, dpsi = solve_zeta(D, kernel)
    rhs = LogDensity(compensator=(T - 1.0) * math.log(z) - z + 1.0, jump_sum=-math.log(dpsi))
    return lhs, rhs
