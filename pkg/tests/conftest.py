import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


class _Recorder:
    def __call__(self, number: int, passed: bool, detail: str) -> None:
        passed = bool(passed)
        _RESULTS[number] = (passed, detail)
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, detail


@pytest.fixture
def criterion():
    """Record and assert one acceptance criterion; lines are repeated in the summary."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
