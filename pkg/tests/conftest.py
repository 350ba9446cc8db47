import pytest

from bdp.measures import build_measure
from bdp.rates import geometric_exit, geometric_regular, linear
from bdp.scale import scale_speed
from bdp.triple import ParameterTriple


@pytest.fixture(scope="session")
def reg():
    r = geometric_regular(4.0)
    return r, scale_speed(r)


@pytest.fixture(scope="session")
def exitr():
    r = geometric_exit(2.0)
    return r, scale_speed(r)


@pytest.fixture(scope="session")
def lin():
    r = linear()
    return r, scale_speed(r)


def geo_nu(C=1.0, rho=0.5):
    return build_measure({"family": "geometric", "C": C, "rho": rho})


def triple(gamma=0.0, beta=0.0, nu=None):
    return ParameterTriple(gamma, beta, nu if nu is not None else build_measure({"family": "zero"}))


# acceptance lines, keyed by criterion number, are echoed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
