"""Shared fixtures; prints the acceptance table at the end of the session."""

import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Callable recording one PASS/FAIL line for an acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
