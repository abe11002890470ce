"""Shared pytest configuration: collects acceptance verdicts for the terminal summary."""

from __future__ import annotations

import pytest

_VERDICTS: dict[str, tuple[str, str]] = {}
_NOTES: list[str] = []


class Ledger:
    """Records one verdict per acceptance criterion."""

    def record(self, key: str, passed: bool, detail: str) -> None:
        _VERDICTS[key] = ("PASS" if passed else "FAIL", detail)

    def note(self, text: str) -> None:
        _NOTES.append(text)


@pytest.fixture(scope="session")
def acceptance() -> Ledger:
    return Ledger()


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS and not _NOTES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_VERDICTS, key=lambda k: (int(k.split()[0]), k)):
        verdict, detail = _VERDICTS[key]
        terminalreporter.write_line(f"{verdict} criterion {key}: {detail}")
    for text in _NOTES:
        terminalreporter.write_line(f"INFO {text}")
