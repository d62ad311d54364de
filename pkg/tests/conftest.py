import re

import numpy as np
import pytest

from climadapt.raster import Raster

_AC = re.compile(r"test_acceptance\.py::test_(ac\d+)_")
_outcomes: dict = {}


def make_raster(seed=0, h=6, w=7, nan_frac=0.0, names=("red", "nir", "swir")):
    rng = np.random.default_rng(seed)
    bands = {}
    for name in names:
        arr = rng.uniform(0.01, 1.0, (h, w))
        if nan_frac:
            arr[rng.random((h, w)) < nan_frac] = np.nan
        bands[name] = arr
    return Raster.from_arrays(bands)


@pytest.fixture
def raster():
    return make_raster()


def pytest_runtest_logreport(report):
    m = _AC.search(report.nodeid)
    if not m:
        return
    key = m.group(1).upper()
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or report.failed:
        _outcomes[key] = _outcomes.get(key, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_outcomes, key=lambda k: int(k[2:])):
        terminalreporter.write_line(f"{key}: {'PASS' if _outcomes[key] else 'FAIL'}")
