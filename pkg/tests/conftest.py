import sys

import pytest
from hypothesis import settings

from crtk.covariance import Matern, SquaredExponential, spectral_moments

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def matern4():
    return spectral_moments(Matern(4.0, 1.0))


@pytest.fixture(scope="session")
def bf5():
    return spectral_moments(SquaredExponential(5.0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
