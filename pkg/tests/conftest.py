"""Prints one pass/fail line per acceptance criterion at the end of the run."""
import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+?)(?:\[.*\])?$")


def pytest_terminal_summary(terminalreporter):
    results: dict[int, dict] = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m or rep.when not in ("call", "setup"):
                continue
            num = int(m.group(1))
            entry = results.setdefault(num, {"name": m.group(2), "ok": True, "seconds": 0.0})
            entry["seconds"] += rep.duration
            if outcome != "passed":
                entry["ok"] = False
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        r = results[num]
        status = "PASS" if r["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status}  {r['name'].replace('_', ' ')} "
                                    f"({r['seconds']:.1f}s)")
