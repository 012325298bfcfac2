import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dynpanel.dgp import simulate

from .helpers import designer_cfg

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def hetero_cfg():
    return designer_cfg()


@pytest.fixture
def hetero_world(hetero_cfg):
    return simulate(hetero_cfg, 20_000, 11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
