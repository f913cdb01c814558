import numpy as np
import pytest

from stc_dmt import algebra


@pytest.fixture(scope="session")
def alamouti():
    return algebra.alamouti_lattice()


@pytest.fixture(scope="session")
def real_sqrt3():
    return algebra.real_sqrt3_lattice()


@pytest.fixture(scope="session")
def gamma3():
    return algebra.unramified_gamma3_lattice()


@pytest.fixture(scope="session")
def golden():
    return algebra.golden_code()


@pytest.fixture(scope="session")
def diag_golden(golden):
    return algebra.diag_replicate(golden, 2)


@pytest.fixture(scope="session")
def nf5():
    return algebra.number_field_multiblock(5)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
