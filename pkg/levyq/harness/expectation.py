"""E[M_t] = 1 at every checkpoint."""

import numpy as np

from levyq.density import log_density_tilted
from levyq.dirichlet import log_density_bridge_composition, sample_dirichlet_path
from levyq.harness.base import MAIN_STREAM, Context, compare, product_estimate, run_replicates
from levyq.types import CheckResult, ExperimentConfig, LogDensity


def log_densities(ctx: Context, i: int) -> list[LogDensity]:
    """The configured log density of replicate i at each checkpoint."""
    cfg = ctx.config
    seed = ctx.seed(MAIN_STREAM, i)
    if cfg.process == "dirichlet":
        D = sample_dirichlet_path(cfg.horizon, cfg.eps, seed, max_jumps=cfg.max_jumps)
        return [log_density_bridge_composition(D, ctx.kernel, t) for t in cfg.checkpoints]
    path = ctx.sample(seed)
    return [log_density_tilted(path, ctx.kernel, ctx.levy, ctx.lam, t=t) for t in cfg.checkpoints]


def density_row(ctx: Context, i: int) -> np.ndarray:
    return np.array([d.value for d in log_densities(ctx, i)])


def run_expectation_check(config: ExperimentConfig) -> list[CheckResult]:
    rows = run_replicates(density_row, config)
    results = []
    for j, t in enumerate(config.checkpoints):
        w = rows[:, j]
        results.append(compare("expectation", f"E[M_t] t={t:g}", t, product_estimate(np.ones_like(w), w, config.seed), 1.0, config))
    return results
