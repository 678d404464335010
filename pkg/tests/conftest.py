import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shearlab.flow import build_cutoffs, build_flow

settings.register_profile("lab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def couette():
    return build_flow("couette")


@pytest.fixture(scope="session")
def perturbed():
    return build_flow("perturbed_couette", a=0.05)


@pytest.fixture(scope="session")
def cut1(perturbed):
    return build_cutoffs(1, 0.05, perturbed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
