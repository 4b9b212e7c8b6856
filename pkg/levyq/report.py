"""CSV and JSON report files."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

from levyq.types import CheckReport, CheckResult

COLUMNS = [
    "check",
    "label",
    "t",
    "estimate",
    "std_error",
    "target",
    "z",
    "ess",
    "n",
    "seed",
    "passed",
    "note",
]


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def render_csv(results: list[CheckResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow(r.row())
    return buf.getvalue()


def write_report(results: list[CheckResult], path: str | Path, name: str) -> tuple[Path, Path]:
    """Write <path>.csv and <path>.json; each file appears whole or not at all."""
    base = Path(path)
    csv_path = base.with_name(base.name + ".csv")
    json_path = base.with_name(base.name + ".json")
    _atomic_write(csv_path, render_csv(results))
    _atomic_write(json_path, CheckReport.from_results(name, results).model_dump_json_pretty() + "\n")
    return csv_path, json_path
