import math

import numpy as np
import pytest

from noma_airlink import NomaPair, RadioConfig, Scenario, UserRegion


@pytest.fixture
def region():
    return UserRegion()


@pytest.fixture
def radio():
    return RadioConfig()


@pytest.fixture
def scenario():
    return Scenario()


@pytest.fixture
def narrow_region():
    return UserRegion(delta=math.radians(1.0))


@pytest.fixture
def pair():
    return NomaPair()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
