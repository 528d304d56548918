import sys

VERDICTS: list[str] = []


def record_verdict(line: str) -> None:
    """Keep an acceptance line for the end-of-run summary and show it immediately."""
    VERDICTS.append(line)
    print(line, file=sys.__stdout__, flush=True)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
