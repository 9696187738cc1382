CRITERION_LINES = []


def record_criterion(line):
    """Collect acceptance-criterion verdicts for the end-of-run summary."""
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)
