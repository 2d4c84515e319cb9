def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    results = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if getattr(rep, "when", "call") != "call":
                continue
            if "test_acceptance" in rep.nodeid:
                results[rep.nodeid.split("::")[-1]] = status
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name in sorted(results):
        verdict = "PASS" if results[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
