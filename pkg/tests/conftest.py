import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

FIG2_QUERY = ["WHERE", "STATE", "=", '"', "alabama", '"', ";"]
FIG1_QUERY = ["SELECT", "NAME", "FROM", "CITY", "WHERE", "STATE", "=", '"', "alabama", '"', ";"]

_criteria = {}


@pytest.fixture
def fig2_query():
    return list(FIG2_QUERY)


@pytest.fixture
def write_lines(tmp_path):
    def write(name, lines):
        path = tmp_path / name
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path
    return write


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        state = _criteria.setdefault(n, [])
        state.append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        if any(o == "failed" for _, o in results):
            verdict = "FAIL"
        elif all(o == "skipped" for _, o in results):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        detail = ", ".join(f"{name}={o}" for name, o in results)
        terminalreporter.write_line(f"criterion {n}: {verdict}  ({detail})")
