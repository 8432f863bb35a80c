from dataclasses import replace

import numpy as np
import pytest

from sipsmi import ScenarioConfig


@pytest.fixture
def baseline_cfg():
    """Default mmWave setup: 4x6 arrays, 30 dBm budget, -90 dBm noise, rho=10."""
    return ScenarioConfig()


@pytest.fixture
def fast_cfg():
    """Baseline with a trimmed Monte-Carlo budget for unit tests."""
    return replace(ScenarioConfig(), mc_trials=2000)


@pytest.fixture
def small_cfg():
    """Tiny well-scaled instance (unit noise) for projection oracles."""
    return ScenarioConfig(
        n_tx=2,
        n_rx_sense=2,
        n_rx_comm=2,
        slots=4,
        noise_power=1.0,
        power_budget=2.0,
        rho_target=5.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
