"""CLI behaviour: exit codes, overrides and output files."""

import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from levyq.cli import app, load_config
from levyq.types import CheckResult, ConfigError, MCEstimate

runner = CliRunner()


def _write_config(tmp_path: Path, **overrides) -> Path:
    data = {
        "schema_version": 1,
        "name": "cli",
        "kernel": {"name": "linear", "params": {"c": 2.0}},
        "eps": 1e-4,
        "n": 300,
        "seed": 3,
        "checkpoints": [1.0],
        "checks": ["expectation"],
        "output": str(tmp_path / "reports" / "cli"),
    }
    data.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


# ============================================================================
# Config loading
# ============================================================================


def test_load_config_applies_overrides(tmp_path):
    path = _write_config(tmp_path)
    config = load_config(path, seed=9, n=None, eps=1e-3)
    assert config.seed == 9
    assert config.n == 300
    assert config.eps == 1e-3


def test_load_config_revalidates_overrides(tmp_path):
    """Overrides go through the same validation as the file."""
    path = _write_config(tmp_path)
    with pytest.raises(ConfigError, match="invalid config"):
        load_config(path, eps=2.0)
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


# ============================================================================
# verify
# ============================================================================


def test_verify_writes_reports(tmp_path):
    path = _write_config(tmp_path)
    result = runner.invoke(app, ["verify", "--config", str(path)])
    assert result.exit_code == 0, result.output
    assert "1/1 passed" in result.output
    csv_text = (tmp_path / "reports" / "cli.csv").read_text()
    assert csv_text.startswith("check,label,t,estimate")
    report = json.loads((tmp_path / "reports" / "cli.json").read_text())
    assert report["passed"] is True
    assert report["results"][0]["label"] == "E[M_t] t=1"


def test_verify_output_override(tmp_path):
    path = _write_config(tmp_path)
    out = tmp_path / "elsewhere" / "run"
    result = runner.invoke(app, ["verify", "-c", str(path), "--out", str(out), "-n", "50"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "elsewhere" / "run.json").exists()


def test_verify_failed_check_exits_1(tmp_path, monkeypatch):
    import levyq.harness

    def failing(name, config):
        est = MCEstimate(mean=2.0, std_error=0.1, n=config.n, seed=config.seed, ess=config.n)
        return [CheckResult(check=name, label="forced", estimate=est, target=1.0, z=10.0, passed=False)]

    monkeypatch.setattr(levyq.harness, "run_check", failing)
    result = runner.invoke(app, ["verify", "--config", str(_write_config(tmp_path))])
    assert result.exit_code == 1
    assert "FAIL" in result.output
    assert (tmp_path / "reports" / "cli.csv").exists()


def test_verify_rejects_unknown_field(tmp_path):
    path = _write_config(tmp_path, colour="red")
    result = runner.invoke(app, ["verify", "--config", str(path)])
    assert result.exit_code == 2
    assert "error" in result.output


def test_verify_missing_config(tmp_path):
    result = runner.invoke(app, ["verify", "--config", str(tmp_path / "nope.json")])
    assert result.exit_code == 2
    assert "cannot read config" in result.output


def test_verify_preflight_failure(tmp_path):
    """A kernel whose declared kappa is too small is caught before sampling."""
    path = _write_config(tmp_path, kernel={"name": "linear", "params": {"c": 2.0}, "kappa": 1.5})
    result = runner.invoke(app, ["verify", "--config", str(path)])
    assert result.exit_code == 2
    assert "kernel" in result.output
    assert not (tmp_path / "reports").exists()


def test_threads_from_environment(tmp_path):
    """LEVYQ_THREADS feeds --threads and is validated like any override."""
    path = _write_config(tmp_path)
    result = runner.invoke(app, ["verify", "--config", str(path)], env={"LEVYQ_THREADS": "0"})
    assert result.exit_code == 2


# ============================================================================
# dirichlet / sde / density
# ============================================================================


def test_dirichlet_command_needs_bridge(tmp_path):
    result = runner.invoke(app, ["dirichlet", "--config", str(_write_config(tmp_path))])
    assert result.exit_code == 2
    assert "dirichlet" in result.output


def test_sde_command_needs_coefficient(tmp_path):
    result = runner.invoke(app, ["sde", "--config", str(_write_config(tmp_path))])
    assert result.exit_code == 2
    assert "coefficient" in result.output


def test_density_writes_jsonl(tmp_path):
    path = _write_config(tmp_path, checkpoints=[0.5, 1.0])
    result = runner.invoke(app, ["density", "--config", str(path), "-n", "5"])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "reports" / "cli.jsonl").read_text().splitlines()
    assert len(lines) == 10
    assert {"compensator", "jump_sum", "log_value"} <= set(json.loads(lines[0]))
    assert "t=0.5: mean density" in result.output


# ============================================================================
# simulate / quadcheck
# ============================================================================


def test_simulate_writes_paths(tmp_path):
    out = tmp_path / "paths"
    result = runner.invoke(app, ["simulate", "--eps", "1e-3", "--n", "3", "--seed", "4", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in out.glob("*.csv")) == ["path_0000.csv", "path_0001.csv", "path_0002.csv"]
    header = json.loads((out / "path_0001.json").read_text())
    assert header["truncation"] == 1e-3


def test_simulate_rejects_bad_levy(tmp_path):
    result = runner.invoke(app, ["simulate", "--levy", "stable", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_quadcheck_passes():
    result = runner.invoke(app, ["quadcheck", "--kernel", "linear", "--kernel", "rational", "--a", "0", "--a", "1"])
    assert result.exit_code == 0, result.output
    assert result.output.count(" ok") == 4


def test_quadcheck_json():
    result = runner.invoke(app, ["quadcheck", "--levy", "tempered_log", "--g0", "0.5", "--rate", "2", "-k", "damped_exp", "--json"])
    assert result.exit_code == 0, result.output
    rows = json.loads(result.output)
    assert len(rows) == 4
    assert all(r["ok"] for r in rows)


def test_quadcheck_unknown_kernel():
    result = runner.invoke(app, ["quadcheck", "--kernel", "nope"])
    assert result.exit_code == 2
    assert "unknown kernel" in result.output
