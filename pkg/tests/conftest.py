import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def config1():
    from floquet_ssh.configs import published_coupling

    return published_coupling("config1")


@pytest.fixture(scope="session")
def config2():
    from floquet_ssh.configs import published_coupling

    return published_coupling("config2")


@pytest.fixture(scope="session")
def config3():
    from floquet_ssh.configs import published_coupling

    return published_coupling("config3")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


PHI_TOPO = 0.75 * math.pi


# ---- acceptance report ----------------------------------------------------
# tests/test_acceptance.py records one line per criterion here; the lines are
# printed together at the end of the session (and also go to stdout as each
# criterion finishes, visible with ``-s``).

ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
