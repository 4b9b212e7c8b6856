"""levyq - quasi-invariance of class-(L) subordinators under jump transformations."""

__version__ = "0.1.0"

from levyq.types import CheckReport, CheckResult, ExperimentConfig, LogDensity, MCEstimate

__all__ = ["CheckReport", "CheckResult", "ExperimentConfig", "LogDensity", "MCEstimate", "__version__"]
