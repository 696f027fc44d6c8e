"""Shared pytest plumbing for the acceptance battery.

test_acceptance.py records one verdict per acceptance criterion; the terminal
summary prints them as stable `criterion N: PASS|FAIL` lines so a log grep
shows the outcome of every criterion even when pytest output is captured.
"""

from __future__ import annotations

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict} - {detail}")
