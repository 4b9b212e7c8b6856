"""Monte Carlo verification harness."""

from levyq.harness.base import run_battery, run_check

__all__ = ["run_battery", "run_check"]
