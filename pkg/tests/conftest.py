import sys


def pytest_terminal_summary(terminalreporter):
    """Replay acceptance verdict lines after capture ends.

    Passing tests have their stderr discarded under fd capture, so the
    acceptance module records its one-line verdicts and this hook prints
    them where `pytest -v` output actually lands.
    """
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERION_LINES", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
