import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    label, description = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _results.append((label, description, rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for label, description, passed, detail in sorted(_results):
        status = "PASS" if passed else "FAIL"
        line = f"{status}  [{label}] {description}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
