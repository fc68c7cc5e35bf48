import numpy as np
import pytest

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[crit] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA):
        outcome, detail = _CRITERIA[crit]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {crit}: {verdict}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
