"""Shared fixtures: configs and tone plans reused across test modules."""

import pytest

from ddsounder.params import default_config, narrowband_config
from ddsounder.waveform import tone_plan


@pytest.fixture(scope="session")
def fullscale():
    """100 MHz / N=212 configuration (hardware-scale parameters)."""
    return default_config()


@pytest.fixture(scope="session")
def narrowband():
    """1 MHz desk-scale configuration used by the simulation pipeline."""
    return narrowband_config()


@pytest.fixture(scope="session")
def nb_plans(narrowband):
    return [tone_plan(narrowband, i) for i in range(narrowband.tx_count)]
