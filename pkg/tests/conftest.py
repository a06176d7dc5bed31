import warnings

import numpy as np
import pytest

from mixloc.grid import build_grid
from mixloc.operators import assemble_kernel
from mixloc.params import ModelParams

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): one acceptance criterion")


def pytest_runtest_logreport(report):
    label = getattr(report, "acceptance_label", None)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ACCEPTANCE[label] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        rep.acceptance_label = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        status = "PASS" if ACCEPTANCE[label] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {label}")


@pytest.fixture(autouse=True)
def _quiet_analysis_warnings():
    # 1D runs always violate N > p; those warnings are expected here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


LINEAR = ModelParams(p=2.0, s=0.75, vartheta=2.5)
DEGENERATE = ModelParams(p=2.5, s=0.75, m=0.4, delta=0.2, gamma=0.1, vartheta=2.2)


@pytest.fixture
def grid32():
    return build_grid(1, 32)


@pytest.fixture
def linear_setup(grid32):
    return LINEAR, grid32, assemble_kernel(grid32, LINEAR)


@pytest.fixture
def degenerate_setup(grid32):
    return DEGENERATE, grid32, assemble_kernel(grid32, DEGENERATE)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
