from __future__ import annotations

import pytest

from resketch.corpus import Problem, TestCase
from resketch.judge import Judge, RunLimits

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _acceptance_outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(_acceptance_outcomes):
        outcome = _acceptance_outcomes[nodeid]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{verdict:6s} {name}")


@pytest.fixture(scope="session")
def judge():
    return Judge(limits=RunLimits(wall_clock_limit=4.0))


@pytest.fixture
def sum_problem():
    """Toy task: read two integers, print their sum."""
    return Problem(
        id="sum1",
        description="Read two integers from stdin and print their sum.",
        difficulty="introductory",
        visible_tests=(TestCase("1 2\n", "3\n"), TestCase("5 7\n", "12\n")),
        hidden_tests=(TestCase("10 20\n", "30\n"), TestCase("0 0\n", "0\n")),
    )


BUGGY_SUM = "a, b = map(int, input().split())\nprint(a - b)\n"
FIXED_SUM = "a, b = map(int, input().split())\nprint(a + b)\n"


@pytest.fixture
def buggy_sum_code():
    return BUGGY_SUM


@pytest.fixture
def fixed_sum_code():
    return FIXED_SUM
