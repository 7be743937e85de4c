import numpy as np
import pytest

from poroscat.material import solve_dispersion
from poroscat.presets import PECOS_OMEGA, pecos_sandstone


@pytest.fixture(scope="session")
def params():
    return pecos_sandstone()


@pytest.fixture(scope="session")
def wave(params):
    return solve_dispersion(params, PECOS_OMEGA)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
