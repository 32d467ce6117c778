from __future__ import annotations

import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line PASS/FAIL verdict for the terminal summary, then assert it."""
    def emit(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
