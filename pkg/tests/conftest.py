"""Shared pytest hooks.

The acceptance tests record their ``[PASS]``/``[FAIL]`` verdict lines in
``VERDICTS``; the terminal-summary hook replays them after the run so
they are visible even under pytest's default output capture.
"""

VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
