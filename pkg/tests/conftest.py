import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def accept():
    """Record one acceptance verdict line and assert it."""
    def record(number: int, ok: bool, text: str):
        ACCEPTANCE_LINES.append(f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {text}")
        assert ok, text
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
