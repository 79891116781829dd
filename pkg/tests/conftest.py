from __future__ import annotations

import pytest

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns a callable ``(label, passed, detail)``."""

    def record(label: str, passed: bool, detail: str) -> bool:
        _CRITERIA.append((label, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_CRITERIA, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}")
