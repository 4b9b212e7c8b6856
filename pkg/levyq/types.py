"""Core types for levyq: experiment configs, Monte Carlo results, errors."""

import math
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator


class LevyqError(ValueError):
    """Base class for domain errors raised by levyq."""


class ConfigError(LevyqError):
    """Invalid parameters, unknown registry names, or failed pre-flight validation."""


class QuadratureError(LevyqError):
    """Quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float) -> None:
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class DensityDomainError(LevyqError):
    """A jump factor 1 + F is not positive, so the density would vanish or go negative."""


class SizingError(LevyqError):
    """Requested truncation would produce more jumps than the configured budget."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LevySpec(_Strict):
    """Lévy family selected by name and parameters."""

    family: Literal["gamma", "tempered_log"] = "gamma"
    g0: float = Field(default=1.0, gt=0)
    rate: float = Field(default=1.0, gt=0, description="Exponential tempering rate b of g0*exp(-b x)/x")


class KernelSpec(_Strict):
    """Transformation kernel selected from the kernel registry."""

    name: str = "identity"
    params: dict[str, float] = Field(default_factory=dict)
    mode: Literal["jump", "composition"] = "jump"
    kappa: float | None = Field(default=None, gt=1)
    alpha: float | None = Field(default=None, gt=0, lt=1)
    normalize: bool = Field(
        default=False,
        description="Rescale k by 1/K(s,1) so that K(s,.) is a bijection of [0,1] (Dirichlet composition).",
    )


class LambdaSpec(_Strict):
    """Piecewise-constant, right-continuous tilting schedule lambda(s)."""

    breakpoints: list[float] = Field(default_factory=list)
    values: list[float] = Field(default_factory=lambda: [0.0])

    @model_validator(mode="after")
    def _check_shape(self) -> "LambdaSpec":
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("lam.values must have exactly one more entry than lam.breakpoints")
        if any(v < 0 or not math.isfinite(v) for v in self.values):
            raise ValueError("lam.values must be finite and nonnegative")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("lam.breakpoints must be strictly increasing")
        return self


class CoefficientSpec(_Strict):
    """SDE coefficient m(t, x) selected from the coefficient registry."""

    name: str = "constant"
    params: dict[str, float] = Field(default_factory=dict)


CheckName = Literal["expectation", "laplace", "distribution", "sde", "dirichlet", "truncation"]
TestFunctionName = Literal["exp_neg", "min5", "indicator_gt1", "marginal_t", "marginal_sq_t"]


class ExperimentConfig(_Strict):
    """One replayable experiment."""

    schema_version: Literal[1]
    name: str = "experiment"
    process: Literal["subordinator", "dirichlet"] = "subordinator"
    levy: LevySpec = Field(default_factory=LevySpec)
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    lam: LambdaSpec = Field(default_factory=LambdaSpec)
    coefficient: CoefficientSpec | None = None
    horizon: float = Field(default=1.0, gt=0, description="Time horizon; T for the Dirichlet bridge")
    eps: float = Field(default=1e-6, gt=0, lt=1)
    n: int = Field(default=100_000, ge=2)
    seed: int = Field(default=0, ge=0)
    checkpoints: list[float] = Field(default_factory=lambda: [1.0])
    test_functions: list[TestFunctionName] = Field(default_factory=lambda: ["exp_neg"])
    lambdas: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    checks: list[CheckName] = Field(default_factory=lambda: ["expectation"])
    threads: int = Field(default=1, ge=1)
    ess_floor: float = Field(default=0.01, gt=0, le=1, description="ESS warning floor as a fraction of n")
    max_jumps: float = Field(default=1e7, gt=0)
    output: str = "levyq_report"

    @model_validator(mode="after")
    def _check_times(self) -> "ExperimentConfig":
        if not self.checkpoints:
            raise ValueError("checkpoints must not be empty")
        for t in self.checkpoints:
            if not 0 < t <= self.horizon:
                raise ValueError(f"checkpoint {t} outside (0, horizon={self.horizon}]")
        if any(lam < 0 for lam in self.lambdas):
            raise ValueError("lambdas must be nonnegative")
        if "sde" in self.checks and self.coefficient is None:
            raise ValueError("the sde check needs a coefficient spec")
        if "dirichlet" in self.checks and self.process != "dirichlet":
            raise ValueError("the dirichlet check needs process='dirichlet'")
        if self.process == "dirichlet":
            unsupported = sorted(set(self.checks) & {"laplace", "sde", "truncation"})
            if unsupported:
                raise ValueError(f"checks {unsupported} need process='subordinator'")
            if self.kernel.mode == "jump" and {"expectation", "distribution"} & set(self.checks):
                raise ValueError("expectation and distribution checks on the bridge need kernel.mode='composition'")
        return self


class PathHeader(BaseModel):
    """Sidecar metadata of an exported path."""

    levy: LevySpec | None = None
    horizon: float = Field(ge=0)
    truncation: float = Field(gt=0)
    seed: int
    count: int = Field(ge=0)


class MCEstimate(BaseModel):
    """Monte Carlo mean with its standard error."""

    mean: float
    std_error: float = Field(ge=0)
    n: int
    seed: int
    ess: float

    @model_validator(mode="after")
    def _ess_bounded(self) -> "MCEstimate":
        if self.ess > self.n * (1 + 1e-9):
            raise ValueError("ess cannot exceed the replicate count")
        return self


class CheckResult(BaseModel):
    """One row of a verification report."""

    check: str
    label: str
    t: float | None = None
    estimate: MCEstimate
    target: float | None = None
    z: float | None = None
    threshold: float = 4.0
    passed: bool
    ess_warning: bool = False
    note: str = ""

    def row(self) -> dict[str, Any]:
        """Flat CSV row."""
        return {
            "check": self.check,
            "label": self.label,
            "t": self.t,
            "estimate": self.estimate.mean,
            "std_error": self.estimate.std_error,
            "target": self.target,
            "z": self.z,
            "ess": self.estimate.ess,
            "n": self.estimate.n,
            "seed": self.estimate.seed,
            "passed": self.passed,
            "note": self.note,
        }


class CheckReport(BaseModel):
    """JSON summary of a run."""

    schema_version: Literal[1] = 1
    name: str
    passed: bool
    n_checks: int
    n_failed: int
    results: list[CheckResult] = Field(default_factory=list)

    @classmethod
    def from_results(cls, name: str, results: list[CheckResult]) -> "CheckReport":
        failed = sum(1 for r in results if not r.passed)
        return cls(name=name, passed=failed == 0, n_checks=len(results), n_failed=failed, results=results)

    def model_dump_json_pretty(self) -> str:
        """Return pretty-printed JSON."""
        return self.model_dump_json(indent=2)


class LogDensity(BaseModel):
    """Log-space Radon-Nikodym density evaluated on one path."""

    compensator: float
    jump_sum: float
    truncation_bound: float = Field(default=0.0, ge=0)
    clamped: bool = False

    @field_validator("compensator", "jump_sum")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("log-density parts must be finite")
        return v

    @computed_field  # type: ignore[prop-decorator]
    @property
    def log_value(self) -> float:
        return self.compensator + self.jump_sum

    @property
    def value(self) -> float:
        return math.exp(self.log_value)
