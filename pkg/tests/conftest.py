import numpy as np
import pytest

from softlimb.config import load_config
from softlimb.kinematics import LimbModel
from softlimb.vision import CameraRig


@pytest.fixture(scope="session")
def parser():
    return load_config()


@pytest.fixture(scope="session")
def model(parser):
    return LimbModel.from_config(parser)


@pytest.fixture(scope="session")
def rig(parser, model):
    return CameraRig.from_config(parser, model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
