import numpy as np
import pytest

from erps.state import Grid

# acceptance results, filled by tests/test_acceptance.py and printed at the end
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def line_grid():
    return Grid.line(-10.0, 10.0, 2048)


@pytest.fixture(scope="session")
def small_grid():
    return Grid.line(-10.0, 10.0, 512)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
