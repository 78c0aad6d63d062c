import numpy as np
import pytest

from oceanplastic.scenario import ScenarioSpec


@pytest.fixture
def small_spec():
    """Desk-size world: quick to reset, still collects pebbles."""
    return ScenarioSpec(
        seed=3, area_size=50.0, pebble_count=60, comm_range=25.0, max_steps=200
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
