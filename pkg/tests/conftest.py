import numpy as np
import pytest

from spinlab import graphs
from spinlab.gibbs import enumerate_table
from spinlab.model import build_model

# Filled by the acceptance module; printed at the end of the session.
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ising_c4():
    return build_model("ising", graphs.cycle(4), beta=0.3)


@pytest.fixture(scope="session")
def ising_c4_table(ising_c4):
    return enumerate_table(ising_c4)


@pytest.fixture(scope="session")
def potts_p3():
    return build_model("potts", graphs.path(3), q=3, beta=0.4)


@pytest.fixture(scope="session")
def coloring_k4():
    return build_model("colorings", graphs.complete(4), q=5)
