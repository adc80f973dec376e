import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from restorelab import synth

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def speech():
    return synth.utterance(0, seconds=1.5)


@pytest.fixture(scope="session")
def noise_pool():
    return synth.noise_pool(0, seconds=2.0)
