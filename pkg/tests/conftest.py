"""Shared acceptance-reporting plumbing.

The acceptance tests record one pass/fail line per criterion through
record_criterion; a terminal-summary hook replays the collected lines
after the run so they are visible even for passing (output-captured)
tests.
"""

_CRITERION_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    _CRITERION_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
