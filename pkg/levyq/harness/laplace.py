"""E[exp(-lambda xi^H_t) M^H_t] = exp(-t Psi(lambda)), with the untilted density."""

import math
from functools import partial

import numpy as np

from levyq.density import log_density_field, transformed_increments
from levyq.harness.base import MAIN_STREAM, Context, compare, context_of, mean_estimate, run_replicates
from levyq.levy_core import laplace_exponent
from levyq.types import CheckResult, ExperimentConfig


def laplace_row(ctx: Context, i: int, lambdas: tuple[float, ...]) -> np.ndarray:
    """exp(-lambda xi^H_t) M^H_t for every (lambda, checkpoint) pair, lambda-major."""
    path = ctx.sample(ctx.seed(MAIN_STREAM, i))
    field = ctx.kernel.field()
    out = []
    for t in ctx.config.checkpoints:
        log_m = log_density_field(path, field, ctx.levy, t=t).log_value
        xi_h = float(np.sum(transformed_increments(path, field, t)))
        out.append([math.exp(log_m - lam * xi_h) for lam in lambdas])
    return np.array(out).T.ravel()


def run_laplace_check(config: ExperimentConfig, lambdas: list[float]) -> list[CheckResult]:
    lambdas_t = tuple(lambdas)
    rows = run_replicates(partial(laplace_row, lambdas=lambdas_t), config)
    levy = context_of(config).levy
    n_t = len(config.checkpoints)
    results = []
    for a, lam in enumerate(lambdas_t):
        for b, t in enumerate(config.checkpoints):
            target = math.exp(-t * laplace_exponent(levy, lam))
            est = mean_estimate(rows[:, a * n_t + b], config.seed)
            results.append(compare("laplace", f"lambda={lam:g} t={t:g}", t, est, target, config))
    return results
