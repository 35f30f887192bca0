"""Shared test plumbing: collect acceptance-criterion verdict lines and
print them in the terminal summary so they are visible even when pytest
captures per-test stdout."""

import pytest

_CRITERION_LINES = []


@pytest.fixture
def criterion():
    """Record (and echo) a one-line pass/fail verdict for one criterion."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        _CRITERION_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
