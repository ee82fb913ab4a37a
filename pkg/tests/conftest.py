import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cme.channel import GaussianPrior, ScalarChannel, two_point, uniform_atoms

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

GRID = np.linspace(-5.0, 5.0, 201)


@pytest.fixture
def grid():
    return GRID.copy()


@pytest.fixture
def binary():
    return ScalarChannel(two_point(0.5), 1.0)


@pytest.fixture
def three_atoms():
    return ScalarChannel(uniform_atoms([-2.0, 0.0, 2.0]), 1.0)


@pytest.fixture
def gaussian():
    return ScalarChannel(GaussianPrior(0.0, 1.0), 1.0)


def prior_zoo():
    """Priors exercised by the cross-module property tests."""
    return {
        "two_point": two_point(0.5),
        "skewed_two_point": two_point(0.3),
        "three_atoms": uniform_atoms([-2.0, 0.0, 2.0]),
        "wide_three_atoms": uniform_atoms([-3.0, 0.0, 3.0]),
        "gaussian": GaussianPrior(0.0, 1.0),
    }


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
