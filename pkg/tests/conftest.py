import pytest

from sdsres.jost import JostSolver

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def solver():
    return JostSolver()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
