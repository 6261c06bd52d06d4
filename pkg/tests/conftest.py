import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary prints them in order."""

    def record(number: int, title: str, passed: bool, detail: str, elapsed: float, limit: float):
        ok = passed and elapsed < limit
        timing = f"{elapsed:.1f}s < {limit:.0f}s" if elapsed < limit else f"{elapsed:.1f}s >= {limit:.0f}s"
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d} {title}: {detail} [{timing}]"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
