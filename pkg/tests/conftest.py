import numpy as np
import pytest

from flexamg import amg, problems


@pytest.fixture(scope="session")
def poisson17():
    return problems.poisson_2d(17)


@pytest.fixture(scope="session")
def hierarchy17(poisson17):
    return amg.build_hierarchy(poisson17.matrix, amg.SetupParams(),
                               poisson17.row_partition)


@pytest.fixture(scope="session")
def poisson33():
    return problems.poisson_2d(33)


@pytest.fixture(scope="session")
def hierarchy33(poisson33):
    return amg.build_hierarchy(poisson33.matrix, amg.SetupParams(),
                               poisson33.row_partition)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
