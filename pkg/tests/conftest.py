import time

import pytest

from acceptance_runs import solution


@pytest.fixture(scope="session")
def full_solution():
    t = time.perf_counter()
    sol = solution()
    sol.metadata["wall_seconds"] = time.perf_counter() - t
    return sol


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_report", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in lines:
            terminalreporter.write_line(ln)
