import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tugwar import boundary as bd
from tugwar import geometry as geo
from tugwar.game import GameParams
from tugwar.solver import SolverConfig, solve

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def disk():
    return geo.ball((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def pdisk():
    return geo.punctured_ball((0.0, 0.0), 1.0)


@pytest.fixture(scope="session")
def linear_field(disk):
    """p = 4 field for f(y) = y_1 on the unit disk at a coarse eps."""
    params = GameParams(2, 4.0, 0.08)
    return solve(disk, bd.LinearCoordinate(disk, 0), params, SolverConfig())


@pytest.fixture(scope="session")
def puncture_field(pdisk):
    """p = 4 field for the mollified indicator of the puncture, coarse eps."""
    params = GameParams(2, 4.0, 0.08)
    f = bd.mollified_indicator(pdisk, bd.point((0, 0)), params.band)
    return solve(pdisk, f, params, SolverConfig())


def unit(a):
    return np.array([np.cos(a), np.sin(a)])
