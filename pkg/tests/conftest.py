import numpy as np
import pytest

from msab.core import GaussianDensity, LinearGaussianSensor, MotionModel

WINDOW = (np.array([-500.0, -500.0]), np.array([500.0, 500.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def position_sensor():
    return LinearGaussianSensor.position(10.0, 0.95, 5.0, WINDOW)


@pytest.fixture
def cv_motion():
    return MotionModel.constant_velocity(1.0, (5.0, 5.0))


@pytest.fixture
def wide_prior():
    return GaussianDensity(np.zeros(4), np.diag([200.0 ** 2, 20.0 ** 2, 200.0 ** 2, 20.0 ** 2]))


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
