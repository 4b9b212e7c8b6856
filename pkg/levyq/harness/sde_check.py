"""E[f(X_t)] from solved paths against E[f(xi_t) M^H_t] from an independent ensemble."""

import math

import numpy as np

from levyq.harness.base import (
    DIRECT_STREAM,
    MAIN_STREAM,
    TEST_FUNCTIONS,
    Context,
    compare,
    context_of,
    effective_sample_size,
    mean_estimate,
    run_replicates,
)
from levyq.levy_core import laplace_exponent
from levyq.sde import sde_change_of_measure, solve_sde
from levyq.types import CheckResult, ConfigError, ExperimentConfig, MCEstimate


def direct_row(ctx: Context, i: int) -> np.ndarray:
    """X_t at each checkpoint."""
    path = ctx.sample(ctx.seed(DIRECT_STREAM, i))
    X = solve_sde(path, ctx.coefficient)
    return np.array([X.value(t) for t in ctx.config.checkpoints])


def weighted_row(ctx: Context, i: int) -> np.ndarray:
    """(xi_t, M^H_t) per checkpoint, flattened."""
    path = ctx.sample(ctx.seed(MAIN_STREAM, i))
    out: list[float] = []
    for t in ctx.config.checkpoints:
        out.extend([path.value(t), sde_change_of_measure(path, ctx.coefficient, ctx.levy, t=t).value])
    return np.array(out)


def run_sde_check(config: ExperimentConfig) -> list[CheckResult]:
    ctx = context_of(config)
    if ctx.coefficient is None:
        raise ConfigError("the sde check needs a coefficient spec")
    direct = run_replicates(direct_row, config)
    weighted = run_replicates(weighted_row, config)
    constant = not ctx.coefficient.state_dependent and not ctx.coefficient.time_dependent
    results = []
    for j, t in enumerate(config.checkpoints):
        x_direct = direct[:, j]
        xi, w = weighted[:, 2 * j], weighted[:, 2 * j + 1]
        for name in config.test_functions:
            f = TEST_FUNCTIONS[name]
            lhs = mean_estimate(f(x_direct), config.seed)
            rhs = mean_estimate(f(xi) * w, config.seed, effective_sample_size(w))
            diff = MCEstimate(
                mean=rhs.mean - lhs.mean,
                std_error=math.hypot(lhs.std_error, rhs.std_error),
                n=config.n,
                seed=config.seed,
                ess=rhs.ess,
            )
            note = f"direct {lhs.mean:.6g} +- {lhs.std_error:.2g}, weighted {rhs.mean:.6g} +- {rhs.std_error:.2g}"
            results.append(compare("sde", f"{name} t={t:g}", t, diff, 0.0, config, note=note))
            if constant and name == "exp_neg" and ctx.levy.closed_form:
                c = float(ctx.coefficient.rate(0.0, 0.0))
                exact = math.exp(-t * laplace_exponent(ctx.levy, c))
                results.append(compare("sde", f"direct exp_neg t={t:g}", t, lhs, exact, config))
    return results
