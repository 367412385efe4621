import numpy as np
import pytest

from bidlab.bid_core import RawBidMatrix

SUBS = ["13", "14", "15", "16", "17"]
REFS = ["1", "2", "3", "4", "5"]

# artificial raw bid matrix of the worked example
RAW = [
    [1, 2, 2, 3, 3],
    [2, 3, 2, 3, 3],
    [4, 2, 3, 1, 1],
    [3, 3, 1, 2, 0],
    [1, 3, 2, 3, 3],
]

MODIFIED = [
    [1, 1, 1, 2, 2],
    [1, 2, 1, 2, 2],
    [0, 1, 2, 1, 1],
    [2, 2, 1, 1, 0],
    [1, 2, 1, 2, 2],
]

SUBMISSION_SIM = [
    [1.0, 0.8, 0.25, 0.25, 0.8],
    [0.8, 1.0, 0.0, 0.5, 1.0],
    [0.25, 0.0, 1.0, 2 / 3, 0.0],
    [0.25, 0.5, 2 / 3, 1.0, 0.5],
    [0.8, 1.0, 0.0, 0.5, 1.0],
]

REFEREE_SIM = [
    [1.0, 0.5, 0.75, 0.0, 0.0],
    [0.5, 1.0, 0.2, 0.4, 0.75],
    [0.75, 0.2, 1.0, 0.2, 0.0],
    [0.0, 0.4, 0.2, 1.0, 1.0],
    [0.0, 0.75, 0.0, 1.0, 1.0],
]


@pytest.fixture
def raw_example():
    return RawBidMatrix(SUBS, REFS, np.array(RAW))


_acceptance: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    number, text = crit
    prev = _acceptance.get(number, (text, "PASS"))[1]
    status = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
    _acceptance[number] = (text, status)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (str(m.args[0]), m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance, key=int):
        text, status = _acceptance[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {text}")
