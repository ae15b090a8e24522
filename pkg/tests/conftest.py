"""Prints one PASS/FAIL line per acceptance criterion after the test run."""


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            for key, value in getattr(rep, "user_properties", []):
                if key == "criterion" and rep.when == "call":
                    number, detail = value
                    lines.append((number, "PASS" if rep.passed else "FAIL", detail))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(lines):
        terminalreporter.write_line(f"[{verdict}] criterion {number:2d}: {detail}")
