from __future__ import annotations

import pytest

from bbspectra import modes as hm
from bbspectra import radial


@pytest.fixture(scope="session")
def profile():
    return radial.solve_limit_eigen(2, 1.0, 1.0)


@pytest.fixture(scope="session")
def table(profile):
    return hm.mode_table(profile, 6)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
