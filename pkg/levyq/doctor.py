"""Preflight and quadrature checks for levyq configs."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from levyq.levy_core import Family, LevyDensity, integrate_F, levy_from_spec, validate_class_L
from levyq.transform import Kernel, KernelGrid, Mode, kernel_from_spec, validate_kernel
from levyq.types import ConfigError, ExperimentConfig, KernelSpec, LevyqError, LevySpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreflightCheck:
    name: str
    ok: bool
    detail: str = ""


@dataclass(frozen=True)
class IdentityCheck:
    """int F_{a,phi} g against -Psi(a) - g0 log phi'(0) for one (kernel, a) pair."""

    kernel: str
    a: float
    signed: float
    target: float
    residual: float
    absolute: float
    bound: float
    tol: float = 1e-6

    @property
    def ok(self) -> bool:
        return self.residual <= self.tol and self.absolute <= self.bound


def _try(name: str, fn: Callable[[], str]) -> PreflightCheck:
    try:
        detail = fn()
    except LevyqError as e:
        return PreflightCheck(name, False, str(e))
    return PreflightCheck(name, True, detail)


def preflight(config: ExperimentConfig) -> list[PreflightCheck]:
    """Validate every ingredient of config before any sampling. Never raises."""
    from levyq.dirichlet import check_unit_interval
    from levyq.sde import coefficient_from_spec, validate_coefficient

    checks: list[PreflightCheck] = []
    times = tuple(float(s) for s in np.linspace(0.0, config.horizon, 5))

    if config.process == "subordinator":
        report = validate_class_L(_unchecked_levy(config.levy))
        checks.append(PreflightCheck("levy", report.ok, report.message or f"{config.levy.family} g0={config.levy.g0:g}"))

    kernel: Kernel | None = None
    try:
        kernel = kernel_from_spec(config.kernel)
    except LevyqError as e:
        checks.append(PreflightCheck("kernel", False, str(e)))
    if kernel is not None:
        kreport = validate_kernel(kernel, KernelGrid(times=times))
        checks.append(PreflightCheck("kernel", kreport.ok, f"{kernel.name}: {kreport.message}"))
        if config.process == "dirichlet" and kernel.mode is Mode.COMPOSITION:
            checks.append(
                _try("unit interval", lambda: f"|K(s,1) - 1| = {check_unit_interval(kernel, config.horizon):.2g}")
            )

    if config.coefficient is not None:
        try:
            coef = coefficient_from_spec(config.coefficient)
        except LevyqError as e:
            checks.append(PreflightCheck("coefficient", False, str(e)))
        else:
            creport = validate_coefficient(coef, times)
            checks.append(PreflightCheck("coefficient", creport.ok, f"{coef.name}: {creport.message}"))

    for c in checks:
        if not c.ok:
            logger.warning("preflight %s failed: %s", c.name, c.detail)
    return checks


def _unchecked_levy(spec: LevySpec) -> LevyDensity:
    family = Family.GAMMA if spec.family == "gamma" and spec.g0 == 1.0 and spec.rate == 1.0 else Family.TEMPERED_LOG
    return LevyDensity(family, g0=spec.g0, rate=spec.rate)


def run_quadcheck(
    levy_spec: LevySpec,
    kernel_names: list[str],
    a_values: tuple[float, ...] = (0.0, 0.5, 2.0),
    s: float = 0.0,
) -> list[IdentityCheck]:
    """Check the compensator identity by quadrature for each kernel section at time s."""
    levy = levy_from_spec(levy_spec)
    rows: list[IdentityCheck] = []
    for name in kernel_names:
        try:
            kernel = kernel_from_spec(KernelSpec(name=name))
        except LevyqError as e:
            raise ConfigError(f"quadcheck: {e}") from e
        section = kernel.section(s)
        for a in a_values:
            res = integrate_F(levy, section, a)
            rows.append(
                IdentityCheck(
                    kernel=name,
                    a=a,
                    signed=res.signed,
                    target=res.target,
                    residual=res.residual,
                    absolute=res.absolute,
                    bound=res.bound,
                )
            )
            logger.debug("quadcheck %s a=%g residual %.3g", name, a, res.residual)
    return rows
