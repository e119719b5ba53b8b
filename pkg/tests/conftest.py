from __future__ import annotations

import pytest

from segkin.front import solve_front
from segkin.kernel import SpatialGrid

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record the one-line PASS/FAIL verdict of an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def front256():
    return solve_front(2.0, SpatialGrid(10.0, 256))


@pytest.fixture(scope="session")
def front512():
    return solve_front(2.0, SpatialGrid(10.0, 512))
