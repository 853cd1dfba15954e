from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from regimelab.errors import (ModelInvalid, NegativeRate, NonSquare, RowMismatch,
                              ToleranceNotReached, ZeroExitRate, ZeroRate)
from regimelab.markov_core import (RegimeParams, TimeGrid, Variant, discrete_transition_matrix,
                                   rate_asymptotics_check, transition_matrix, validate_generator)

# high-precision values of the two-state closed form, lambda = 1
P11_HALF = 0.683939720585721160797761885081
P12_HALF = 0.316060279414278839202238114919
DIAG_100 = 0.99004983374916805357390597718
OFF_100 = 0.00990066334662234888959294788735
DEFICIT_100 = 0.0000495029042095975365010749327117
RATE_ERRORS = {10: 0.0936537653899092933, 100: 0.00993366533776511104,
               1000: 0.000999333666533377765, 10_000: 0.0000999933336666533338}


@st.composite
def generators(draw, max_d=4):
    d = draw(st.integers(2, max_d))
    rates = draw(st.lists(st.floats(0.05, 5.0), min_size=d * d, max_size=d * d))
    a = np.array(rates).reshape(d, d)
    np.fill_diagonal(a, 0.0)
    return validate_generator(a)


class TestValidateGenerator:
    def test_symmetric_two_state(self, sym2):
        assert sym2.lambda_lower == sym2.lambda_upper == 1.0
        assert sym2.rate_ratio == 1.0
        assert sym2.is_constant_rate

    def test_three_state_exit_rates(self, three_state):
        assert_allclose(three_state.exit_rates, [3.0, 2.0, 4.0])
        assert three_state.rate_ratio == 2.0
        assert_allclose(three_state.q.sum(axis=1), 0.0, atol=1e-15)

    def test_zero_exit_rate(self):
        with pytest.raises(ZeroExitRate) as exc:
            validate_generator([[0, 1], [0, 0]])
        assert exc.value.i == 2

    def test_negative_rate(self):
        with pytest.raises(NegativeRate) as exc:
            validate_generator([[0, 1, -1], [1, 0, 1], [1, 1, 0]])
        assert (exc.value.i, exc.value.j) == (1, 3)

    @pytest.mark.parametrize("raw", [[[0, 1, 2]], [[0, 1], [1, 0], [1, 1]], [[1.0]]])
    def test_non_square(self, raw):
        with pytest.raises(NonSquare):
            validate_generator(raw)

    def test_diagonal_consistent(self):
        G = validate_generator([[-2, 2], [3, -3]])
        assert_allclose(G.exit_rates, [2, 3])

    def test_row_mismatch(self):
        with pytest.raises(RowMismatch):
            validate_generator([[-2.5, 2], [3, -3]])

    def test_structural_zero_needs_flag(self):
        raw = [[0, 1, 0], [1, 0, 1], [1, 1, 0]]
        with pytest.raises(ZeroRate):
            validate_generator(raw)
        assert validate_generator(raw, allow_zero_rates=True).allow_zero_rates

    def test_immutable(self, sym2):
        with pytest.raises(ValueError):
            sym2.off_diag[0, 1] = 5.0


class TestRegimeParams:
    def test_bounds(self, fixture_params):
        assert fixture_params.mu_bound == 0.05
        assert fixture_params.sigma_bound == 0.3
        assert_allclose(fixture_params.log_drift, [-0.005, 0.005])

    def test_zero_vol_requires_degenerate(self):
        with pytest.raises(ModelInvalid):
            RegimeParams([0.0], [0.0], 1.0)
        assert RegimeParams([0.0], [0.0], 1.0, degenerate=True).sigma_bound == 0.0

    def test_positive_price(self):
        with pytest.raises(ModelInvalid):
            RegimeParams([0.0], [0.1], 0.0)

    def test_state_count_mismatch(self, three_state, fixture_params):
        with pytest.raises(ModelInvalid):
            fixture_params.check_states(three_state)


class TestTimeGrid:
    def test_floor_index(self):
        assert TimeGrid(1.0, 10).index(0.35) == 3
        assert TimeGrid(1.0, 10).index(1.0) == 10
        assert TimeGrid(1.0, 100).index(0.29) == 29

    @given(st.floats(0.1, 10.0), st.integers(1, 5000), st.floats(0.0, 1.0))
    def test_index_brackets_time(self, T, N, frac):
        grid = TimeGrid(T, N)
        t = frac * T
        k = grid.index(t)
        assert 0 <= k <= N
        slack = 1e-9 * max(1.0, t * N / T) * grid.step
        assert k * grid.step <= t + slack
        if k < N:
            assert t < (k + 1) * grid.step + slack

    def test_rejects_outside(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 10).index(1.5)


class TestTransitionMatrix:
    def test_identity_at_zero(self, three_state):
        assert_allclose(transition_matrix(three_state, 0.0), np.eye(3), atol=0)

    def test_two_state_half(self, sym2):
        P = transition_matrix(sym2, 0.5)
        assert_allclose(P, [[P11_HALF, P12_HALF], [P12_HALF, P11_HALF]], atol=1e-13)

    def test_stationary(self, sym2):
        assert_allclose(transition_matrix(sym2, 10.0), 0.5, atol=1e-8)

    def test_matches_expm(self, three_state):
        for t in (0.01, 0.3, 2.0):
            assert_allclose(transition_matrix(three_state, t), expm(three_state.q * t), atol=1e-12)

    def test_max_terms(self, sym2):
        with pytest.raises(ToleranceNotReached):
            transition_matrix(sym2, 50.0, max_terms=5)

    @settings(max_examples=40, deadline=None)
    @given(generators(), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
    def test_semigroup_and_rows(self, G, s, t):
        Ps, Pt, Pst = (transition_matrix(G, x) for x in (s, t, s + t))
        assert_allclose(Pst, Ps @ Pt, atol=1e-10)
        assert_allclose(Pst.sum(axis=1), 1.0, atol=1e-10)
        assert (Pst >= 0).all()


class TestDiscreteTransitionMatrix:
    def test_paper_diagonal(self, sym2):
        M, deficit = discrete_transition_matrix(sym2, TimeGrid(1.0, 100), Variant.PAPER_DIAGONAL)
        assert_allclose(np.diag(M), DIAG_100, rtol=1e-13)
        assert_allclose(M[0, 1], OFF_100, rtol=0, atol=1e-12)
        assert_allclose(deficit, DEFICIT_100, rtol=0, atol=1e-12)
        assert_allclose(M.sum(axis=1) + deficit, 1.0, atol=1e-14)

    def test_row_stochastic(self, sym2):
        M, deficit = discrete_transition_matrix(sym2, TimeGrid(1.0, 100), "stochastic")
        assert_allclose(M.sum(axis=1), 1.0, atol=1e-12)
        assert (deficit == 0).all()

    def test_deficit_second_order(self, three_state):
        ratios = []
        for N in (10, 100, 1000, 10_000):
            _, deficit = discrete_transition_matrix(three_state, TimeGrid(1.0, N), "paper")
            h = 1.0 / N
            assert (deficit >= 0).all()
            assert deficit.max() <= (three_state.lambda_upper * h) ** 2
            ratios.append(deficit.max() / h ** 2)
        assert max(ratios) / min(ratios) < 1.5


class TestRateAsymptotics:
    def test_two_state_errors(self, sym2):
        rep = rate_asymptotics_check(sym2, [10, 100, 1000, 10_000])
        for e in rep.entries:
            assert e.error == pytest.approx(RATE_ERRORS[e.key], rel=1e-8)
        assert rep.decay_order == pytest.approx(1.0, abs=0.05)
        assert rep.passed

    def test_doubling_factor(self, three_state):
        rep = rate_asymptotics_check(three_state, [50, 100, 200, 400, 800])
        errs = rep.errors
        assert all(1.5 <= a / b <= 2.5 for a, b in zip(errs, errs[1:]))

    def test_majorization_three_state(self, three_state):
        rep = rate_asymptotics_check(three_state, [10, 100, 1000])
        assert all(rep.notes["majorization"])

    def test_zero_rate_entry(self):
        G = validate_generator([[0, 1, 0], [1, 0, 1], [1, 1, 0]], allow_zero_rates=True)
        scaled = [transition_matrix(G, 1.0 / N)[0, 2] * N for N in (10, 100, 1000)]
        assert scaled[0] > scaled[1] > scaled[2]
        assert scaled[2] < 1e-3

    def test_needs_increasing_grid(self, sym2):
        with pytest.raises(ValueError):
            rate_asymptotics_check(sym2, [100, 10])

    def test_two_points_no_order(self, sym2):
        assert rate_asymptotics_check(sym2, [10, 100]).decay_order is None
