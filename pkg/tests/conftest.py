import numpy as np
import pytest

from conecalc.mellin_core import RadialGrid


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def fine_grid():
    # narrow window, dense nodes: used where dilations and cut-offs stack up
    return RadialGrid(8.0, 8192)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
