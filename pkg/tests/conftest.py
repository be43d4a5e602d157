import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dacprecode import SystemConfig, preset
from dacprecode.montecarlo import setup_trial

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_cfg():
    return SystemConfig(B=8, U=2, N=32, S=10, T=3)


@pytest.fixture(scope="session")
def desk_cfg():
    return preset("desk")


@pytest.fixture(scope="session")
def desk_trial(desk_cfg):
    return setup_trial(desk_cfg, 0)


@pytest.fixture(scope="session")
def small_trial(small_cfg):
    return setup_trial(small_cfg, 0)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
