import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one ``criterion N: PASS|FAIL detail`` line; returns the pass flag."""

    def record(number, passed: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
