"""End-to-end tests that drive the installed module through a subprocess.

Run with: uv run pytest tests/test_e2e.py -v
Skip them: uv run pytest -m "not e2e"
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

CONFIGS = Path(__file__).parent.parent / "configs"


def _levyq(*args: str, cwd: Path | None = None) -> subprocess.CompletedProcess[str]:
    return subprocess.run(
        [sys.executable, "-m", "levyq", *args],
        capture_output=True,
        text=True,
        timeout=600,
        cwd=cwd,
    )


@pytest.mark.e2e
def test_module_version():
    result = _levyq("version")
    assert result.returncode == 0
    assert result.stdout.strip() == "levyq 0.1.0"


@pytest.mark.e2e
def test_module_help_lists_commands():
    result = _levyq("--help")
    assert result.returncode == 0
    for command in ("verify", "density", "dirichlet", "sde", "simulate", "quadcheck"):
        assert command in result.stdout


@pytest.mark.e2e
def test_verify_reports_are_reproducible(tmp_path: Path):
    """Two runs with the same seed write byte-identical reports."""
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run / "report"
        result = _levyq("verify", "-c", str(CONFIGS / "gamma_scaling.json"), "-n", "400", "--out", str(out))
        assert result.returncode in (0, 1), result.stderr
        outputs.append((out.with_name("report.csv").read_bytes(), out.with_name("report.json").read_bytes()))
    assert outputs[0] == outputs[1]
    assert json.loads(outputs[0][1])["n_checks"] > 0


@pytest.mark.e2e
def test_bad_config_exits_2(tmp_path: Path):
    path = tmp_path / "bad.json"
    path.write_text('{"schema_version": 2}')
    result = _levyq("verify", "-c", str(path))
    assert result.returncode == 2
    assert "error" in result.stderr
