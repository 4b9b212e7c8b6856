"""Dirichlet bridge checks.

Always: D_t against Beta(t, T - t). Composition kernels: E[L_t] = 1 and the
reweighted marginals of K(t, D_t). Jump kernels: the two-sided identity
E[Phi(D^K) U^K_T] = E[Phi(D) p_T(z)/p_T(1) zeta'(1)], tested as a paired
difference for a few path functionals Phi.
"""

import logging

import numpy as np

from levyq.dirichlet import (
    DirichletPath,
    beta_reference,
    jump_transform_dirichlet,
    log_density_bridge_composition,
    log_density_bridge_jump,
    sample_dirichlet_path,
)
from levyq.harness.base import (
    MAIN_STREAM,
    Context,
    compare,
    context_of,
    mean_estimate,
    product_estimate,
    reference_expectation,
    run_replicates,
)
from levyq.harness.distribution import marginal_times
from levyq.transform import Mode, kernel_primitive
from levyq.types import CheckResult, ExperimentConfig

logger = logging.getLogger(__name__)

# Test functions with a closed form under Beta; the others are left to the distribution check.
_BETA_FUNCTIONS = ("marginal_t", "marginal_sq_t")


FUNCTIONAL_NAMES = ("1", "D(T/2)", "D(T/4)^2")


def functionals(D: DirichletPath) -> list[float]:
    """Path functionals in FUNCTIONAL_NAMES order."""
    return [1.0, D.value(D.T / 2), D.value(D.T / 4) ** 2]


def _sample(ctx: Context, i: int) -> DirichletPath:
    cfg = ctx.config
    return sample_dirichlet_path(cfg.horizon, cfg.eps, ctx.seed(MAIN_STREAM, i), max_jumps=cfg.max_jumps)


def composition_row(ctx: Context, i: int) -> np.ndarray:
    """[D_t..., L_t at checkpoints..., K(t, D_t)..., L_T, resamples, clamps]."""
    cfg = ctx.config
    D = _sample(ctx, i)
    times = marginal_times(cfg)
    plain = [D.value(t) for t in times]
    densities = [log_density_bridge_composition(D, ctx.kernel, t) for t in cfg.checkpoints]
    moved = [float(kernel_primitive(ctx.kernel, t, D.value(t))) for t in times]
    final = log_density_bridge_composition(D, ctx.kernel, cfg.horizon)
    clamps = sum(d.clamped for d in densities) + final.clamped
    return np.array(plain + [d.value for d in densities] + moved + [final.value, D.resamples, clamps])


def jump_row(ctx: Context, i: int) -> np.ndarray:
    """[D_t..., Phi(D^K)..., U^K_T, Phi(D)..., rhs weight, resamples, clamps]."""
    D = _sample(ctx, i)
    plain = [D.value(t) for t in marginal_times(ctx.config)]
    lhs, rhs = log_density_bridge_jump(D, ctx.kernel)
    moved = functionals(jump_transform_dirichlet(D, ctx.kernel))
    base = functionals(D)
    return np.array(plain + moved + [lhs.value] + base + [rhs.value, D.resamples, 0.0])


def _beta_rows(times: list[float], block: np.ndarray, config: ExperimentConfig, note: str) -> list[CheckResult]:
    results = []
    for j, t in enumerate(times):
        law = beta_reference(t, config.horizon)
        x = block[:, j]
        mean = mean_estimate(x, config.seed)
        results.append(compare("dirichlet", f"D_t mean t={t:g}", t, mean, float(law.mean()), config, note=note))
        centered = mean_estimate((x - float(law.mean())) ** 2, config.seed)
        results.append(compare("dirichlet", f"D_t variance t={t:g}", t, centered, float(law.var()), config, note=note))
    return results


def _split_diagnostics(rows: np.ndarray) -> tuple[np.ndarray, str]:
    """Strip the trailing (resamples, clamps) columns and summarize them for the report."""
    resamples = int(np.sum(rows[:, -2]))
    clamps = int(np.sum(rows[:, -1]))
    if resamples or clamps:
        logger.warning("Dirichlet check: %d empty-path resamples, %d boundary clamps", resamples, clamps)
    return rows[:, :-2], f"resamples {resamples}, clamps {clamps}"


def run_dirichlet_check(config: ExperimentConfig) -> list[CheckResult]:
    ctx = context_of(config)
    times = marginal_times(config)
    n_t = len(times)
    results: list[CheckResult] = []
    if ctx.kernel.mode is Mode.COMPOSITION:
        rows, diag = _split_diagnostics(run_replicates(composition_row, config))
        results.extend(_beta_rows(times, rows[:, :n_t], config, diag))
        n_c = len(config.checkpoints)
        for j, t in enumerate(config.checkpoints):
            w = rows[:, n_t + j]
            est = product_estimate(np.ones_like(w), w, config.seed)
            results.append(compare("dirichlet", f"E[L_t] t={t:g}", t, est, 1.0, config, note=diag))
        final = rows[:, -1]
        for j, t in enumerate(times):
            x = rows[:, n_t + n_c + j]
            law = beta_reference(t, config.horizon)
            for name in _BETA_FUNCTIONS:
                f = x if name == "marginal_t" else x**2
                est = product_estimate(f, final, config.seed)
                results.append(
                    compare(
                        "dirichlet",
                        f"K(t,D_t) {name} t={t:g}",
                        t,
                        est,
                        reference_expectation(law, name),
                        config,
                        note=diag,
                    )
                )
        return results

    rows, diag = _split_diagnostics(run_replicates(jump_row, config))
    results.extend(_beta_rows(times, rows[:, :n_t], config, diag))
    n_f = len(FUNCTIONAL_NAMES)
    moved = rows[:, n_t : n_t + n_f]
    lhs_w = rows[:, n_t + n_f]
    base = rows[:, n_t + n_f + 1 : n_t + 2 * n_f + 1]
    rhs_w = rows[:, -1]
    T = config.horizon
    for j, name in enumerate(FUNCTIONAL_NAMES):
        lhs = moved[:, j] * lhs_w
        rhs = base[:, j] * rhs_w
        est = mean_estimate(lhs - rhs, config.seed)
        note = f"lhs {float(np.mean(lhs)):.6g}, rhs {float(np.mean(rhs)):.6g}; {diag}"
        results.append(compare("dirichlet", f"jump identity Phi={name}", T, est, 0.0, config, note=note))
    return results
