import numpy as np
import pytest

from wedflow.config import scalar_problem
from wedflow.wed import TimeGrid


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_bvp():
    return scalar_problem(TimeGrid(1.0, 400, 1e-2))
