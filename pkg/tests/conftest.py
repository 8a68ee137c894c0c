import importlib

import numpy as np
import pytest

from pllvle.numeric import _pykernels


def _available_kernels():
    mods = [pytest.param(_pykernels, id="python")]
    try:
        mods.append(pytest.param(importlib.import_module("pllvle.numeric._ckernels"), id="cython"))
    except ImportError:
        mods.append(pytest.param(None, id="cython", marks=pytest.mark.skip(reason="extension not built")))
    return mods


@pytest.fixture(params=_available_kernels())
def kernels(request):
    return request.param


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    def record(number, passed, detail):
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"{status} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
