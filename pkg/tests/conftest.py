import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL line for an acceptance criterion.

    The line is printed immediately (outside capture) and repeated in the
    terminal summary, so it survives ``pytest -v | tee``.
    """
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        with capman.global_and_fixture_disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
