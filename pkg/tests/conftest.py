"""Shared pytest wiring for the suite."""

import sys


def pytest_terminal_summary(terminalreporter):
    # the acceptance module collects one PASS/FAIL line per check; show
    # them after the run even though stdout capture ate the prints
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance checklist")
        for line in lines:
            terminalreporter.write_line(line)
