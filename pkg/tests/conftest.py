import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion at the end of a run."""
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            name = nodeid.split("::")[-1]
            verdict = "PASS" if status == "passed" else "FAIL"
            # a failed setup shadows a missing call phase
            if name not in rows or verdict == "FAIL":
                rows[name] = verdict
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, verdict in rows.items():
        terminalreporter.write_line(f"[{verdict}] {name}")
