from __future__ import annotations

import re

import numpy as np
import pytest

from regimelab.markov_core import RegimeParams, TimeGrid, validate_generator
from regimelab.discrete_scheme import ReturnFamily

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.fixture
def sym2():
    """Two states, lambda_12 = lambda_21 = 1."""
    return validate_generator([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def three_state():
    return validate_generator([[0, 2, 1], [1, 0, 1], [1, 3, 0]])


@pytest.fixture
def fixture_params():
    return RegimeParams([0.0, 0.05], [0.1, 0.3], 100.0)


@pytest.fixture
def single_regime():
    """Two identical regimes, so switching has no effect on prices."""
    return RegimeParams([0.0, 0.0], [0.2, 0.2], 100.0)


@pytest.fixture
def binomial64(fixture_params):
    return ReturnFamily("binomial", fixture_params, TimeGrid(1.0, 64))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if m is None:
        return
    number = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = "PASS" if report.outcome == "passed" else report.outcome.upper()
        previous = _CRITERIA.get(number, (None, "PASS"))[1]
        _CRITERIA[number] = (m.group(2), outcome if previous == "PASS" else previous)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        name, outcome = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {name:<28s} {'pass' if outcome == 'PASS' else 'FAIL'}"
                                    + ("" if outcome == "PASS" else f" ({outcome.lower()})"))
