import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria = {}


def pytest_runtest_logreport(report):
    item_marks = getattr(report, "criterion", None)
    if item_marks is None:
        return
    if report.when == "call" or report.failed:
        ok = _criteria.get(item_marks, (True, ""))[0] and report.passed
        detail = ""
        if not report.passed:
            lines = report.longreprtext.splitlines()
            detail = next((ln[1:].strip() for ln in lines if ln.startswith("E ")), lines[-1] if lines else "")
        _criteria[item_marks] = (ok, _criteria.get(item_marks, (True, ""))[1] or detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f"  ({detail[:160]})" if detail else ""))
