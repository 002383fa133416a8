import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def shell12():
    from shellcut.geometry import concentric_shell
    return concentric_shell(3, 1.0, 2.0)


@pytest.fixture(scope="session")
def eccentric03():
    from shellcut.geometry import AxiDomain, Ball
    return AxiDomain(3, Ball(0.3, 2.0), Ball(0.0, 1.0))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
