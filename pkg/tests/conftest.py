import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def record_line(capsys):
    """Print one acceptance line immediately and keep it for the session summary."""

    def record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
