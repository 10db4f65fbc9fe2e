"""Shared test plumbing: the acceptance verdict reporter.

Acceptance tests register one line each through the `verdict` fixture;
the lines are echoed in a terminal section after the run so the gate's
outcome is readable without -s.
"""

from __future__ import annotations

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record `<tag> PASS|FAIL: detail`, print it, and assert the outcome."""

    def record(tag: str, ok: bool, detail: str) -> None:
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance summary")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
