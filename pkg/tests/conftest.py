import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""

    def report(line):
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
