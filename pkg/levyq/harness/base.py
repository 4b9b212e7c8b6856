"""Replicate ensembles, Monte Carlo estimators and the check dispatcher."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import repeat
from typing import Any

import numpy as np
from scipy import integrate, stats

from levyq.density import CadlagStep
from levyq.levy_core import LevyDensity, levy_from_spec
from levyq.sde import Coefficient, coefficient_from_spec
from levyq.simulate import JumpPath, derive_seed, sample_jump_path
from levyq.transform import Kernel, kernel_from_spec
from levyq.types import CheckResult, ConfigError, ExperimentConfig, MCEstimate

logger = logging.getLogger(__name__)

# Substream ids: replicate i of stream k draws from derive_seed(seed, k, i).
MAIN_STREAM = 0
DIRECT_STREAM = 1
REFINE_STREAM = 2

CHUNK = 2048
Z_THRESHOLD = 4.0
KS_LEVEL = 0.01

TEST_FUNCTIONS: dict[str, Callable[[Any], Any]] = {
    "exp_neg": lambda x: np.exp(-np.asarray(x, dtype=float)),
    "min5": lambda x: np.minimum(np.asarray(x, dtype=float), 5.0),
    "indicator_gt1": lambda x: (np.asarray(x, dtype=float) > 1.0).astype(float),
    "marginal_t": lambda x: np.asarray(x, dtype=float),
    "marginal_sq_t": lambda x: np.asarray(x, dtype=float) ** 2,
}


def reference_expectation(law: Any, name: str) -> float:
    """E[f(X)] for a nonnegative reference law, via its survival function where f is not polynomial."""
    if name == "marginal_t":
        return float(law.mean())
    if name == "marginal_sq_t":
        return float(law.var() + law.mean() ** 2)
    if name == "indicator_gt1":
        return float(law.sf(1.0))
    if name == "min5":
        return float(integrate.quad(law.sf, 0.0, 5.0, limit=200)[0])
    if name == "exp_neg":
        return 1.0 - float(integrate.quad(lambda x: math.exp(-x) * law.sf(x), 0.0, math.inf, limit=200)[0])
    raise ConfigError(f"Unknown test function: {name}")


@dataclass(frozen=True)
class Context:
    """Everything a replicate needs, rebuilt from the config JSON in each worker."""

    config: ExperimentConfig
    levy: LevyDensity
    kernel: Kernel
    lam: CadlagStep
    coefficient: Coefficient | None

    def seed(self, stream: int, i: int) -> int:
        return replicate_seed(self.config.seed, stream, i)

    def sample(self, seed: int) -> JumpPath:
        cfg = self.config
        return sample_jump_path(self.levy, cfg.horizon, cfg.eps, seed, max_jumps=cfg.max_jumps)


@lru_cache(maxsize=8)
def load_context(config_json: str) -> Context:
    config = ExperimentConfig.model_validate_json(config_json)
    coefficient = coefficient_from_spec(config.coefficient) if config.coefficient else None
    return Context(
        config=config,
        levy=levy_from_spec(config.levy),
        kernel=kernel_from_spec(config.kernel),
        lam=CadlagStep.from_spec(config.lam),
        coefficient=coefficient,
    )


def context_of(config: ExperimentConfig) -> Context:
    return load_context(config.model_dump_json())


def replicate_seed(master: int, stream: int, i: int) -> int:
    return derive_seed(master, stream, i)


ReplicateFn = Callable[[Context, int], np.ndarray]


def _run_chunk(fn: ReplicateFn, config_json: str, start: int, stop: int) -> np.ndarray:
    ctx = load_context(config_json)
    return np.vstack([np.atleast_1d(fn(ctx, i)) for i in range(start, stop)])


def run_replicates(fn: ReplicateFn, config: ExperimentConfig, n: int | None = None) -> np.ndarray:
    """Rows fn(ctx, i) for i < n, computed in chunks and stacked in replicate order.

    fn must be a module-level function so worker processes can import it.
    """
    n = config.n if n is None else n
    config_json = config.model_dump_json()
    chunks = [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]
    if config.threads == 1 or len(chunks) == 1:
        parts = [_run_chunk(fn, config_json, a, b) for a, b in chunks]
    else:
        starts, stops = zip(*chunks)
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(_run_chunk, repeat(fn), repeat(config_json), starts, stops))
    return np.concatenate(parts, axis=0)


def effective_sample_size(w: np.ndarray) -> float:
    """(sum w)^2 / sum w^2."""
    w = np.asarray(w, dtype=float)
    sq = float(np.sum(w * w))
    return float(np.sum(w)) ** 2 / sq if sq > 0 else 0.0


def mean_estimate(values: np.ndarray, seed: int, ess: float | None = None) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean=float(np.mean(values)), std_error=se, n=n, seed=seed, ess=n if ess is None else ess)


def product_estimate(f: np.ndarray, w: np.ndarray, seed: int) -> MCEstimate:
    """Plain mean of f w; unbiased for E[f M] when w = M."""
    return mean_estimate(np.asarray(f, dtype=float) * np.asarray(w, dtype=float), seed, effective_sample_size(w))


def ratio_estimate(f: np.ndarray, w: np.ndarray, seed: int) -> MCEstimate:
    """Self-normalized sum w f / sum w with delta-method standard error."""
    f = np.asarray(f, dtype=float)
    w = np.asarray(w, dtype=float)
    total = float(np.sum(w))
    r = float(np.sum(w * f)) / total
    se = math.sqrt(float(np.sum((w * (f - r)) ** 2))) / total
    return MCEstimate(mean=r, std_error=se, n=f.size, seed=seed, ess=effective_sample_size(w))


def weighted_ks(samples: np.ndarray, weights: np.ndarray, cdf: Callable[[Any], Any]) -> float:
    """sup |F_w - F| for the weighted empirical distribution function."""
    order = np.argsort(samples, kind="stable")
    x = np.asarray(samples, dtype=float)[order]
    w = np.asarray(weights, dtype=float)[order]
    upper = np.cumsum(w) / np.sum(w)
    lower = np.concatenate(([0.0], upper[:-1]))
    ref = np.asarray(cdf(x), dtype=float)
    return float(max(np.max(np.abs(upper - ref)), np.max(np.abs(lower - ref))))


def ks_critical(ess: float, level: float = KS_LEVEL) -> float:
    """Critical value of the exact one-sample KS law at sample size floor(ESS)."""
    return float(stats.kstwo.isf(level, max(1, int(math.floor(ess)))))


def compare(
    check: str,
    label: str,
    t: float | None,
    estimate: MCEstimate,
    target: float,
    config: ExperimentConfig,
    *,
    note: str = "",
) -> CheckResult:
    """z-test of estimate against target at Z_THRESHOLD standard errors."""
    diff = estimate.mean - target
    if estimate.std_error > 0:
        z = diff / estimate.std_error
    else:
        z = 0.0 if abs(diff) <= 1e-12 * max(1.0, abs(target)) else math.copysign(math.inf, diff)
    ess_warning = estimate.ess < config.ess_floor * estimate.n
    if ess_warning:
        logger.warning(
            "%s %s: ESS %.1f of %d replicates; importance weights are degenerate", check, label, estimate.ess,
            estimate.n,
        )
    return CheckResult(
        check=check,
        label=label,
        t=t,
        estimate=estimate,
        target=target,
        z=z,
        threshold=Z_THRESHOLD,
        passed=abs(z) <= Z_THRESHOLD,
        ess_warning=ess_warning,
        note=note,
    )


def ks_result(
    check: str,
    label: str,
    t: float | None,
    samples: np.ndarray,
    weights: np.ndarray,
    cdf: Callable[[Any], Any],
    config: ExperimentConfig,
    level: float = KS_LEVEL,
) -> CheckResult:
    d = weighted_ks(samples, weights, cdf)
    ess = effective_sample_size(weights)
    crit = ks_critical(ess, level)
    estimate = MCEstimate(mean=d, std_error=0.0, n=len(samples), seed=config.seed, ess=ess)
    return CheckResult(
        check=check,
        label=label,
        t=t,
        estimate=estimate,
        target=0.0,
        threshold=crit,
        passed=d <= crit,
        ess_warning=ess < config.ess_floor * len(samples),
        note=f"weighted KS at level {level:g}",
    )


def run_check(name: str, config: ExperimentConfig) -> list[CheckResult]:
    """Dispatch one named check."""
    if name == "expectation":
        from levyq.harness.expectation import run_expectation_check
        return run_expectation_check(config)
    elif name == "laplace":
        from levyq.harness.laplace import run_laplace_check
        return run_laplace_check(config, config.lambdas)
    elif name == "distribution":
        from levyq.harness.distribution import run_distribution_check
        return run_distribution_check(config)
    elif name == "sde":
        from levyq.harness.sde_check import run_sde_check
        return run_sde_check(config)
    elif name == "dirichlet":
        from levyq.harness.dirichlet_check import run_dirichlet_check
        return run_dirichlet_check(config)
    elif name == "truncation":
        from levyq.harness.truncation import run_truncation_check
        return run_truncation_check(config)
    raise ConfigError(f"Unknown check: {name}. Must be one of expectation, laplace, distribution, sde, dirichlet, truncation.")


def run_battery(config: ExperimentConfig) -> list[CheckResult]:
    results: list[CheckResult] = []
    for name in config.checks:
        logger.info("Running %s check for %s (n=%d)", name, config.name, config.n)
        results.extend(run_check(name, config))
    return results
