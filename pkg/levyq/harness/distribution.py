"""Reweighted marginals of the transformed process against their analytic laws.

Under M^{H,lambda} with constant lambda, xi^H_t is Gamma(g0 t, rate b + lambda).
For the Dirichlet bridge, K(t, D_t) under L^{K,T}_T is Beta(t, T - t).
"""

from typing import Any

import numpy as np
from scipy import stats

from levyq.density import log_density_tilted, transformed_increments
from levyq.dirichlet import beta_reference, log_density_bridge_composition, sample_dirichlet_path
from levyq.harness.base import (
    MAIN_STREAM,
    TEST_FUNCTIONS,
    Context,
    compare,
    context_of,
    ks_result,
    ratio_estimate,
    reference_expectation,
    run_replicates,
)
from levyq.levy_core import reference_marginal
from levyq.transform import kernel_primitive
from levyq.types import CheckResult, ConfigError, ExperimentConfig


def marginal_times(config: ExperimentConfig) -> list[float]:
    if config.process == "dirichlet":
        return [t for t in config.checkpoints if t < config.horizon]
    return list(config.checkpoints)


def marginal_row(ctx: Context, i: int) -> np.ndarray:
    """(transformed value, weight) per checkpoint, flattened."""
    cfg = ctx.config
    seed = ctx.seed(MAIN_STREAM, i)
    out: list[float] = []
    if cfg.process == "dirichlet":
        D = sample_dirichlet_path(cfg.horizon, cfg.eps, seed, max_jumps=cfg.max_jumps)
        w = log_density_bridge_composition(D, ctx.kernel, cfg.horizon).value
        for t in marginal_times(cfg):
            out.extend([float(kernel_primitive(ctx.kernel, t, D.value(t))), w])
        return np.array(out)
    path = ctx.sample(seed)
    field = ctx.kernel.field()
    for t in cfg.checkpoints:
        x = float(np.sum(transformed_increments(path, field, t)))
        out.extend([x, log_density_tilted(path, ctx.kernel, ctx.levy, ctx.lam, t=t).value])
    return np.array(out)


def reference_law(ctx: Context, t: float) -> Any:
    cfg = ctx.config
    if cfg.process == "dirichlet":
        return beta_reference(t, cfg.horizon)
    if ctx.lam.breakpoints:
        raise ConfigError("the distribution check needs a constant lambda schedule")
    lam = ctx.lam.values[0]
    if lam == 0:
        return reference_marginal(ctx.levy, t)
    return stats.gamma(a=ctx.levy.g0 * t, scale=1.0 / (ctx.levy.rate + lam))


def run_distribution_check(config: ExperimentConfig) -> list[CheckResult]:
    ctx = context_of(config)
    times = marginal_times(config)
    laws = [reference_law(ctx, t) for t in times]
    rows = run_replicates(marginal_row, config)
    results = []
    for j, (t, law) in enumerate(zip(times, laws)):
        x, w = rows[:, 2 * j], rows[:, 2 * j + 1]
        mean, var = float(law.mean()), float(law.var())
        results.append(compare("distribution", f"mean t={t:g}", t, ratio_estimate(x, w, config.seed), mean, config))
        results.append(
            compare("distribution", f"variance t={t:g}", t, ratio_estimate((x - mean) ** 2, w, config.seed), var, config)
        )
        for name in config.test_functions:
            f = TEST_FUNCTIONS[name]
            target = reference_expectation(law, name)
            results.append(compare("distribution", f"{name} t={t:g}", t, ratio_estimate(f(x), w, config.seed), target, config))
        results.append(ks_result("distribution", f"KS t={t:g}", t, x, w, law.cdf, config))
    return results
