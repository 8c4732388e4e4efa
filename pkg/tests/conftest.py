import pytest

_RESULTS = []


@pytest.fixture
def record():
    """Register the outcome of one acceptance criterion for the final summary."""

    def add(number, title, ok, detail=""):
        _RESULTS.append((number, title, bool(ok), detail))
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
