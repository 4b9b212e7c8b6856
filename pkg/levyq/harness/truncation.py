"""Sensitivity of the density to the truncation level.

Each replicate is refined from eps to eps / 10 with the coarse jumps kept,
so the two log densities differ only through the added band of small jumps.
"""

import math

import numpy as np

from levyq.density import log_density_tilted
from levyq.harness.base import (
    MAIN_STREAM,
    REFINE_STREAM,
    Z_THRESHOLD,
    Context,
    mean_estimate,
    run_replicates,
)
from levyq.simulate import refine_jump_path
from levyq.types import CheckResult, ExperimentConfig, MCEstimate

REFINE_FACTOR = 10.0


def truncation_row(ctx: Context, i: int) -> np.ndarray:
    """[|delta log M|, M coarse, M fine, bound coarse + bound fine] at the horizon."""
    cfg = ctx.config
    coarse = ctx.sample(ctx.seed(MAIN_STREAM, i))
    fine = refine_jump_path(coarse, ctx.levy, cfg.eps / REFINE_FACTOR, ctx.seed(REFINE_STREAM, i))
    t = cfg.horizon
    a = log_density_tilted(coarse, ctx.kernel, ctx.levy, ctx.lam, t=t)
    b = log_density_tilted(fine, ctx.kernel, ctx.levy, ctx.lam, t=t)
    return np.array(
        [abs(a.log_value - b.log_value), a.value, b.value, a.truncation_bound + b.truncation_bound]
    )


def run_truncation_check(config: ExperimentConfig) -> list[CheckResult]:
    rows = run_replicates(truncation_row, config)
    t = config.horizon
    n = rows.shape[0]
    # pathwise: each coupled pair must sit inside its own summed bound
    ratios = rows[:, 0] / np.maximum(rows[:, 3], 1e-300)
    worst = int(np.argmax(ratios))
    pathwise = MCEstimate(mean=float(ratios[worst]), std_error=0.0, n=n, seed=config.seed, ess=n)
    results = [
        CheckResult(
            check="truncation",
            label=f"max |log M(eps) - log M(eps/{REFINE_FACTOR:g})| / bound",
            t=t,
            estimate=pathwise,
            target=1.0,
            threshold=1.0,
            passed=pathwise.mean <= 1.0,
            note=f"worst replicate {worst}; mean gap {float(np.mean(rows[:, 0])):.3g}",
        )
    ]
    # both means sit within expm1(bound) of 1, so their gap may be nonzero at that scale
    bound = float(np.max(rows[:, 3]))
    diff = mean_estimate(rows[:, 1] - rows[:, 2], config.seed)
    slack = math.expm1(bound)
    z = diff.mean / diff.std_error if diff.std_error > 0 else 0.0
    results.append(
        CheckResult(
            check="truncation",
            label=f"E[M(eps)] - E[M(eps/{REFINE_FACTOR:g})]",
            t=t,
            estimate=diff,
            target=0.0,
            z=z,
            threshold=slack,
            passed=abs(diff.mean) <= slack + Z_THRESHOLD * diff.std_error,
            note=f"coarse {float(np.mean(rows[:, 1])):.6g}, fine {float(np.mean(rows[:, 2])):.6g}",
        )
    )
    return results
