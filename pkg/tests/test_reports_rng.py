from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from regimelab.reports import (ConvergenceReport, Entry, csv_text, decay_order, resolved_monotone,
                               write_json)
from regimelab.rng import BLOCK_SIZE, SeedSpec, block_sizes, map_blocks, mc_mean, mc_means, tag


class TestSeeds:
    def test_reproducible(self):
        a = SeedSpec(7).generator("x", 3).standard_normal(5)
        b = SeedSpec(7).generator("x", 3).standard_normal(5)
        assert_allclose(a, b, rtol=0, atol=0)

    def test_streams_differ(self):
        a = SeedSpec(7, 0).generator(1).random(4)
        b = SeedSpec(7, 1).generator(1).random(4)
        c = SeedSpec(8, 0).generator(1).random(4)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)

    def test_child_is_prefix(self):
        s = SeedSpec(3)
        assert_allclose(s.child("a").generator(2).random(3), s.generator("a", 2).random(3), atol=0)

    def test_tag_stable(self):
        assert tag("abc") == 0x352441C2
        assert tag("abc") == tag("abc") != tag("abd")

    def test_invalid(self):
        with pytest.raises(ValueError):
            SeedSpec(-1)
        with pytest.raises(ValueError):
            SeedSpec(1, -2)


class TestBlocks:
    @given(st.integers(1, 5 * BLOCK_SIZE))
    def test_sizes_sum(self, n):
        sizes = block_sizes(n)
        assert sum(sizes) == n and max(sizes) <= BLOCK_SIZE

    def test_zero_trials(self):
        with pytest.raises(ValueError):
            block_sizes(0)

    @pytest.mark.parametrize("threads", [2, 5])
    def test_thread_count_irrelevant(self, threads):
        fn = lambda rng, n: rng.standard_normal(n)
        one = mc_mean(fn, 3 * BLOCK_SIZE + 17, SeedSpec(1), threads=1)
        many = mc_mean(fn, 3 * BLOCK_SIZE + 17, SeedSpec(1), threads=threads)
        assert one == many

    def test_block_order(self):
        out = map_blocks(lambda rng, n: n, 2 * BLOCK_SIZE + 3, SeedSpec(), threads=3)
        assert out == [BLOCK_SIZE, BLOCK_SIZE, 3]


class TestEstimates:
    def test_mean_and_se(self):
        est = mc_mean(lambda rng, n: rng.standard_normal(n), 200_000, SeedSpec(2))
        assert abs(est.value) <= 3 * est.std_error
        assert est.std_error == pytest.approx(1 / np.sqrt(200_000), rel=0.02)

    def test_complex(self):
        est = mc_mean(lambda rng, n: np.exp(1j * rng.standard_normal(n)), 100_000, SeedSpec(3))
        assert est.is_complex
        assert abs(est.value.real - np.exp(-0.5)) <= 3 * est.std_error
        assert abs(est.value.imag) <= 3 * est.std_error_imag

    def test_columns(self):
        a, b = mc_means(lambda rng, n: np.stack([np.ones(n), np.zeros(n)], axis=1), 1000, SeedSpec())
        assert (a.value, a.std_error, b.value) == (1.0, 0.0, 0.0)


class TestReportHelpers:
    def test_decay_order_exact(self):
        ns = [10, 100, 1000]
        assert decay_order(ns, [1 / n for n in ns]) == pytest.approx(1.0)
        assert decay_order(ns, [n ** -0.5 for n in ns]) == pytest.approx(0.5)

    def test_decay_order_skips_unresolved(self):
        assert decay_order([1, 2, 3], [1.0, 0.5, 0.1], [0.0, 0.0, 0.1]) is None

    def test_resolved_monotone(self):
        assert resolved_monotone([3.0, 2.0, 1.0])
        assert not resolved_monotone([1.0, 2.0])
        assert resolved_monotone([1.0, 2.0], [0.0, 1.0])
        assert not resolved_monotone([1.0, 1.0], strict=True)

    def test_report_serialization(self, tmp_path):
        rep = ConvergenceReport("cf", [Entry(64, 1 + 0.5j, 0.1, 1 + 0j, 0.5, 0.6, True, 0.2)],
                                True, "demo")
        rows = rep.csv_rows()
        assert [r[0] for r in rows] == ["cf[re]", "cf[im]"]
        assert csv_text(("name", "N"), [("a", 1)]) == "name,N\na,1\n"
        write_json(rep.to_dict(), tmp_path / "r.json")
        d = json.loads((tmp_path / "r.json").read_text())
        assert d["entries"][0]["estimate"] == {"re": 1.0, "im": 0.5}
        assert d["entries"][0]["statistic"] == "cf[N=64]"

    def test_decay_needs_three_points(self):
        with pytest.raises(ValueError):
            ConvergenceReport("x", [Entry(1, 0.0)], True, "", decay_order=1.0)
