import warnings

import pytest

from micropolar.mms import build_mms_case
from micropolar.picard import SolverOptions, run_fixed_point
from micropolar.verify import ACCEPTANCE_PARAMS


@pytest.fixture(scope="session")
def duct():
    return build_mms_case("duct", ACCEPTANCE_PARAMS)


def _solve(case, n, opts=None):
    data = case.iteration_data(case.grid(n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        state, report = run_fixed_point(data, opts or SolverOptions())
    return data, state, report


@pytest.fixture(scope="session")
def duct33(duct):
    return _solve(duct, 33)


@pytest.fixture(scope="session")
def duct65(duct):
    return _solve(duct, 65)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def record_criterion(number, name, passed, detail=""):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}".rstrip()
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def criterion():
    return record_criterion
