"""Tests for levyq.types."""

import json
import math

import pytest
from pydantic import ValidationError

from levyq.types import (
    CheckReport,
    CheckResult,
    ConfigError,
    ExperimentConfig,
    LambdaSpec,
    LevyqError,
    LogDensity,
    MCEstimate,
    QuadratureError,
)


def _estimate(**kw) -> MCEstimate:
    data = {"mean": 1.0, "std_error": 0.01, "n": 100, "seed": 0, "ess": 100.0}
    data.update(kw)
    return MCEstimate(**data)


def test_config_defaults():
    """A minimal config fills in every default."""
    config = ExperimentConfig(schema_version=1)
    assert config.process == "subordinator"
    assert config.levy.family == "gamma"
    assert config.kernel.name == "identity"
    assert config.kernel.mode == "jump"
    assert config.lam.values == [0.0]
    assert config.checks == ["expectation"]
    assert config.ess_floor == 0.01
    assert config.max_jumps == 1e7


def test_config_requires_schema_version():
    """schema_version is mandatory and pinned to 1."""
    with pytest.raises(ValidationError):
        ExperimentConfig()
    with pytest.raises(ValidationError):
        ExperimentConfig(schema_version=2)


def test_config_rejects_unknown_fields():
    """Unknown keys are errors at every level."""
    with pytest.raises(ValidationError):
        ExperimentConfig(schema_version=1, colour="red")
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"schema_version": 1, "kernel": {"name": "linear", "shape": 2}})


def test_config_checkpoints_within_horizon():
    """Checkpoints must lie in (0, horizon]."""
    ExperimentConfig(schema_version=1, horizon=2.0, checkpoints=[1.0, 2.0])
    with pytest.raises(ValidationError):
        ExperimentConfig(schema_version=1, horizon=1.0, checkpoints=[1.5])
    with pytest.raises(ValidationError):
        ExperimentConfig(schema_version=1, checkpoints=[0.0])
    with pytest.raises(ValidationError):
        ExperimentConfig(schema_version=1, checkpoints=[])


def test_config_check_prerequisites():
    """Checks that need a coefficient or a bridge say so."""
    with pytest.raises(ValidationError, match="coefficient"):
        ExperimentConfig(schema_version=1, checks=["sde"])
    with pytest.raises(ValidationError, match="dirichlet"):
        ExperimentConfig(schema_version=1, checks=["dirichlet"])
    with pytest.raises(ValidationError, match="subordinator"):
        ExperimentConfig(schema_version=1, process="dirichlet", checks=["laplace"])
    with pytest.raises(ValidationError, match="composition"):
        ExperimentConfig(schema_version=1, process="dirichlet", checks=["expectation"])
    ExperimentConfig.model_validate(
        {"schema_version": 1, "process": "dirichlet", "kernel": {"mode": "composition"}, "checks": ["expectation"]}
    )


def test_config_field_ranges():
    """eps in (0, 1), n >= 2, threads >= 1, lambdas nonnegative."""
    for bad in ({"eps": 0.0}, {"eps": 1.0}, {"n": 1}, {"threads": 0}, {"lambdas": [-1.0]}, {"horizon": 0.0}):
        with pytest.raises(ValidationError):
            ExperimentConfig(schema_version=1, **bad)


def test_lambda_spec_shape():
    """One more value than breakpoints, increasing breakpoints, nonnegative values."""
    LambdaSpec(breakpoints=[0.5], values=[0.0, 1.0])
    with pytest.raises(ValidationError):
        LambdaSpec(breakpoints=[0.5], values=[1.0])
    with pytest.raises(ValidationError):
        LambdaSpec(breakpoints=[0.5, 0.2], values=[0.0, 1.0, 2.0])
    with pytest.raises(ValidationError):
        LambdaSpec(values=[-0.5])


def test_config_json_round_trip():
    """A config survives dump and reload unchanged."""
    config = ExperimentConfig.model_validate(
        {
            "schema_version": 1,
            "kernel": {"name": "damped_exp", "params": {"a": 1.0, "b": 0.5}, "mode": "composition"},
            "lam": {"breakpoints": [0.5], "values": [0.0, 1.0]},
            "checks": ["expectation", "truncation"],
        }
    )
    assert ExperimentConfig.model_validate_json(config.model_dump_json()) == config


def test_mc_estimate_ess_bounded():
    """ESS cannot exceed the replicate count."""
    _estimate(ess=100.0)
    with pytest.raises(ValidationError):
        _estimate(ess=101.0)
    with pytest.raises(ValidationError):
        _estimate(std_error=-1.0)


def test_check_report_counts_failures():
    """from_results counts checks and failures."""
    ok = CheckResult(check="expectation", label="a", estimate=_estimate(), target=1.0, z=0.0, passed=True)
    bad = CheckResult(check="expectation", label="b", estimate=_estimate(), target=2.0, z=-100.0, passed=False)
    report = CheckReport.from_results("demo", [ok, bad])
    assert report.n_checks == 2
    assert report.n_failed == 1
    assert report.passed is False
    data = json.loads(report.model_dump_json_pretty())
    assert data["schema_version"] == 1
    assert [r["label"] for r in data["results"]] == ["a", "b"]


def test_check_result_row():
    """row() flattens the estimate."""
    r = CheckResult(check="laplace", label="x", t=0.5, estimate=_estimate(mean=0.7), target=0.69, z=1.0, passed=True)
    row = r.row()
    assert row["estimate"] == 0.7
    assert row["std_error"] == 0.01
    assert row["t"] == 0.5
    assert row["passed"] is True


def test_log_density_value():
    """log_value is the sum of the parts and is serialized."""
    d = LogDensity(compensator=-0.25, jump_sum=0.5)
    assert d.log_value == pytest.approx(0.25)
    assert d.value == pytest.approx(math.exp(0.25))
    assert json.loads(d.model_dump_json())["log_value"] == pytest.approx(0.25)


def test_log_density_rejects_non_finite():
    """Non-finite parts are invalid records."""
    with pytest.raises(ValidationError):
        LogDensity(compensator=math.inf, jump_sum=0.0)
    with pytest.raises(ValidationError):
        LogDensity(compensator=0.0, jump_sum=math.nan)


def test_error_hierarchy():
    """Domain errors are ValueErrors; QuadratureError carries its estimate."""
    assert issubclass(ConfigError, LevyqError)
    assert issubclass(LevyqError, ValueError)
    err = QuadratureError("did not converge", 1.5e-3)
    assert err.error_estimate == 1.5e-3
    assert "1.500e-03" in str(err)
