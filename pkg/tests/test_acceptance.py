"""Acceptance gate: one test per numbered criterion, at the stated scale and tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints one
pass/fail line per criterion.
"""

from __future__ import annotations

import filecmp
import math
import time

import numpy as np
import pytest

from regimelab.cli import main
from regimelab.convergence_lab import (cf_convergence, cf_rate_check, fdd_compare,
                                       price_convergence, tightness_diagnostics, two_state_transition)
from regimelab.ctmc_sim import jump_count_mgf_check, jump_law_convergence, mgf_bound
from regimelab.discrete_scheme import ReturnFamily, verify_conditions
from regimelab.limit_sim import CfSpec
from regimelab.markov_core import TimeGrid, rate_asymptotics_check, transition_matrix
from regimelab.reports import resolved_monotone
from regimelab.rng import SeedSpec

SEED = SeedSpec(12345)
BS_PRICE = 7.965567455405796  # Black-Scholes, x0 = K = 100, sigma = 0.2, T = 1, r = 0


class _Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_transition_kernel(sym2):
    with _Clock() as clock:
        for t in (0.1, 0.5, 1.0, 10.0):
            closed = np.array([[1 + math.exp(-2 * t), 1 - math.exp(-2 * t)],
                               [1 - math.exp(-2 * t), 1 + math.exp(-2 * t)]]) / 2
            np.testing.assert_allclose(transition_matrix(sym2, t), closed, rtol=0, atol=1e-10)
            np.testing.assert_allclose(two_state_transition(sym2, t), closed, rtol=0, atol=1e-15)
        rng = np.random.default_rng(1)
        for s, t in rng.uniform(0, 5, size=(25, 2)):
            np.testing.assert_allclose(transition_matrix(sym2, s + t),
                                       transition_matrix(sym2, s) @ transition_matrix(sym2, t),
                                       rtol=0, atol=1e-10)
    assert clock.elapsed < 1.0


def test_c02_rate_asymptotics(sym2):
    with _Clock() as clock:
        report = rate_asymptotics_check(sym2, [10, 100, 1000, 10_000])
    assert report.passed
    assert abs(report.decay_order - 1.0) <= 0.2
    assert all(report.notes["majorization"])
    assert clock.elapsed < 1.0


def test_c03_jump_count_mgf(sym2):
    with _Clock() as clock:
        report = jump_count_mgf_check(sym2, 1.0, [0.1, 0.5, 1.0], 1_000_000, SEED)
    for e in report.entries:
        assert e.oracle == pytest.approx(math.exp(math.expm1(e.key)), rel=1e-15)
        assert abs(e.estimate - e.oracle) <= 3 * e.std_error
        assert e.estimate <= mgf_bound(sym2, 1.0, e.key)
    assert report.passed
    assert clock.elapsed < 30.0


def test_c04_jump_law(sym2):
    with _Clock() as clock:
        report = jump_law_convergence(sym2, 1.0, [64, 256, 512], 1, [0.4], 1_000_000, SEED)
    last = report.entries[-1]
    assert last.oracle == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert last.error <= 0.02
    # error decreasing: exact discrete errors strictly, Monte Carlo errors wherever resolved
    exact = report.notes["exact_error"]
    assert all(b < a for a, b in zip(exact, exact[1:]))
    assert resolved_monotone(report.errors, [e.std_error for e in report.entries])
    assert report.notes["scaling_m_plus_1_diverges"]
    assert report.passed
    assert clock.elapsed < 120.0


def test_c05_fdd(sym2):
    with _Clock() as clock:
        reports = [fdd_compare(sym2, (0.25, 0.75), (x1, x2), [256], 100_000, 1.0, SEED)
                   for x1 in (1, 2) for x2 in (1, 2)]
    total = sum(r.entries[0].oracle for r in reports)
    assert total == pytest.approx(1.0, abs=1e-12)
    for r in reports:
        e = r.entries[0]
        assert e.error <= max(3 * e.std_error, 0.01)
        assert r.passed
    assert clock.elapsed < 60.0


@pytest.mark.parametrize("spec", [CfSpec((1.0,), (1.0,)), CfSpec((1.0, -1.0), (0.5, 1.0))],
                         ids=["one_block", "two_blocks"])
def test_c06_cf_convergence(sym2, binomial64, spec):
    with _Clock() as clock:
        report = cf_convergence(sym2, binomial64, spec, [64, 256, 1024], 100_000, SEED)
    d = report.errors
    assert d[-1] < 0.03
    assert all(b < a for a, b in zip(d, d[1:]))
    assert report.notes["independent_discrete_cf"][-1]["distance"] < 0.03
    assert report.passed
    assert clock.elapsed < 300.0


@pytest.mark.parametrize("kind", ["binomial", "trinomial"])
def test_c07_return_conditions(fixture_params, kind):
    with _Clock() as clock:
        family = ReturnFamily(kind, fixture_params, TimeGrid(1.0, 1000))
        gamma, compounding, *variances = verify_conditions(family, [0.29, 0.5, 1.0],
                                                           [10, 100, 1000, 10_000])
    assert gamma.passed and abs(gamma.decay_order - 0.5) <= 0.05
    assert compounding.passed and abs(compounding.decay_order - 1.0) <= 0.2
    for rep in variances:
        assert rep.passed
        assert max(rep.notes["analytic_mismatch"]) <= 1e-14
    assert clock.elapsed < 1.0


@pytest.mark.parametrize("kind", ["binomial", "trinomial"])
def test_c08_cf_rate(fixture_params, kind):
    with _Clock() as clock:
        family = ReturnFamily(kind, fixture_params, TimeGrid(1.0, 64))
        report = cf_rate_check(fixture_params, family, 0.0, 1.0, [1.0], [64, 256, 1024])
    ratios = report.estimates
    assert max(ratios) / min(ratios) < 4.0
    assert report.passed
    assert clock.elapsed < 120.0


def test_c09_tightness(sym2, binomial64):
    with _Clock() as clock:
        report = tightness_diagnostics(sym2, binomial64, [64, 256, 1024], [0.1, 0.25, 0.5, 1.0, 2.0],
                                       [1 / 1024, 1 / 64, 0.1, 1.0], 0.5, 100_000, SEED,
                                       diagnostic=(1024, 1 / 64, 0.05))
    for N in report.n_grid:
        c_tail = [report.c_tail[(N, c)] for c in (0.1, 0.25, 0.5, 1.0, 2.0)]
        m_tail = [report.modulus_tail[(N, d)] for d in (1 / 1024, 1 / 64, 0.1, 1.0)]
        assert all(b <= a for a, b in zip(c_tail, c_tail[1:]))
        assert all(b >= a for a, b in zip(m_tail, m_tail[1:]))
        assert report.notes["stated_bound"][N] == pytest.approx(N * math.log1p(binomial64.with_steps(N).gamma_N))
        assert report.notes["stated_bound_tail"][N] == 0.0
        assert report.hard_bound_tail[N] == 0.0
    assert report.passed
    assert clock.elapsed < 120.0


def test_c10_pricing(sym2, single_regime):
    with _Clock() as clock:
        family = ReturnFamily("binomial", single_regime, TimeGrid(1.0, 1024))
        report = price_convergence(sym2, family, 100.0, [1024], 1_000_000, SEED)
    e = report.entries[-1]
    assert e.oracle == pytest.approx(BS_PRICE, abs=1e-12)
    assert abs(e.estimate - 7.9656) <= 0.15
    assert report.passed
    assert clock.elapsed < 120.0


def test_c11_determinism(tmp_path):
    args = ["report-all", "--seed", "12345"]
    with _Clock() as clock:
        codes = [main(args + ["--threads", str(th), "--out", str(tmp_path / name)])
                 for name, th in (("a", 1), ("b", 1), ("c", 8))]
    assert codes == [0, 0, 0]
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "manifest.json" in names and "summary.csv" in names
    for other in ("b", "c"):
        assert sorted(p.name for p in (tmp_path / other).iterdir()) == names
        match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / other, names, shallow=False)
        assert mismatch == [] and errors == []
    assert clock.elapsed < 600.0
