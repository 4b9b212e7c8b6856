"""Shared fixtures for the levyq test suite."""

from collections.abc import Callable
from typing import Any

import numpy as np
import pytest

from levyq.levy_core import Family, LevyDensity, make_levy_density
from levyq.simulate import JumpPath
from levyq.types import ExperimentConfig


@pytest.fixture
def gamma() -> LevyDensity:
    return make_levy_density(Family.GAMMA)


@pytest.fixture
def tempered() -> LevyDensity:
    return make_levy_density(Family.TEMPERED_LOG, {"g0": 0.5, "rate": 2.0})


@pytest.fixture
def hand_path() -> JumpPath:
    """Three jumps on [0, 1] with sizes well above the truncation level."""
    return JumpPath(1.0, 1e-3, np.array([0.2, 0.5, 0.9]), np.array([0.3, 1.2, 0.05]))


@pytest.fixture
def make_config() -> Callable[..., ExperimentConfig]:
    """ExperimentConfig with small-n defaults, overridable per test."""

    def factory(**overrides: Any) -> ExperimentConfig:
        data: dict[str, Any] = {
            "schema_version": 1,
            "name": "test",
            "horizon": 1.0,
            "eps": 1e-6,
            "n": 4000,
            "seed": 1234,
            "checkpoints": [0.5, 1.0],
        }
        data.update(overrides)
        return ExperimentConfig.model_validate(data)

    return factory
