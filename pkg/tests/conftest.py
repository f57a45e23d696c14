import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion.

    Call ``verdict(number, ok, detail)``; the line is printed immediately and
    repeated in the terminal summary so it survives output capture.
    """

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        _LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
