"""Exact simulation of the continuous-time switching chain and checks of its jump laws."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import BadTimePoint, OutOfHorizon, UnsupportedOrder
from .markov_core import GeneratorMatrix, TimeGrid, Variant, discrete_transition_matrix
from .reports import ConvergenceReport, Entry, decay_order, resolved_monotone
from .rng import SeedSpec, SubSeed, as_subseed, map_blocks, mc_mean


@dataclass(frozen=True)
class CtmcPath:
    """One trajectory on ``[0, horizon]``.

    ``jump_times[0] == 0`` and ``states[n]`` (1-based) is the state held on
    ``[jump_times[n], jump_times[n+1])``.
    """

    jump_times: tuple[float, ...]
    states: tuple[int, ...]
    horizon: float

    def __post_init__(self):
        tau, y = self.jump_times, self.states
        if len(tau) != len(y) or not tau or tau[0] != 0.0:
            raise ValueError("jump_times must start at 0 and match states in length")
        if any(b <= a for a, b in zip(tau, tau[1:])):
            raise ValueError("jump times must be strictly increasing")
        if tau[-1] > self.horizon:
            raise ValueError("last jump after the horizon")
        if any(a == b for a, b in zip(y, y[1:])):
            raise ValueError("consecutive states must differ")

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times) - 1

    @property
    def occupation_times(self) -> tuple[float, ...]:
        """``theta_k = tau_k - tau_{k-1}`` for the completed sojourns."""
        tau = self.jump_times
        return tuple(b - a for a, b in zip(tau, tau[1:]))

    def csv_rows(self, trial: int) -> list[tuple]:
        return [(trial, n, repr(float(t)), s) for n, (t, s) in enumerate(zip(self.jump_times, self.states))]


def sample_ctmc_path(G: GeneratorMatrix, T: float, y0: int = 1,
                     seed: SeedSpec = SeedSpec()) -> CtmcPath:
    """Holding time in state i is Exp(lambda_i); the next state is drawn from lambda_ij / lambda_i."""
    if not 1 <= y0 <= G.d:
        raise ValueError(f"initial state must be in 1..{G.d}")
    if not T > 0:
        raise ValueError("T must be positive")
    rng = seed.generator("ctmc_path")
    kernel = G.jump_kernel
    t, s = 0.0, y0 - 1
    taus, states = [0.0], [y0]
    while True:
        t += rng.exponential(1.0 / G.exit_rates[s])
        if t >= T:
            break
        s = int(rng.choice(G.d, p=kernel[s]))
        taus.append(t)
        states.append(s + 1)
    return CtmcPath(tuple(taus), tuple(states), float(T))


def evaluate_path(path: CtmcPath, t: float) -> int:
    """State at time t (right-continuous)."""
    if t < 0 or t > path.horizon:
        raise OutOfHorizon(t, path.horizon)
    return path.states[bisect.bisect_right(path.jump_times, t) - 1]


# -- vectorized batches ------------------------------------------------------

@dataclass(frozen=True)
class PathBatch:
    """``n`` paths stored column-wise; states are 0-based here.

    Column 0 of ``jump_times`` is 0; unused trailing columns hold ``inf`` and
    repeat the final state.
    """

    jump_times: NDArray[np.float64]
    states: NDArray[np.int64]
    n_jumps: NDArray[np.int64]
    horizon: float

    def states_at(self, times) -> NDArray[np.int64]:
        times = np.asarray(times, float)
        idx = np.zeros((self.states.shape[0], times.size), dtype=np.int64)
        for c in range(1, self.jump_times.shape[1]):
            idx += self.jump_times[:, c:c + 1] <= times[None, :]
        return np.take_along_axis(self.states, idx, axis=1)

    def occupation(self, a: float, b: float, d: int) -> NDArray[np.float64]:
        """Time spent in each state during ``[a, b]``, shape ``(n, d)``."""
        n, cols = self.states.shape
        occ = np.zeros((n, d))
        ends = np.concatenate([self.jump_times[:, 1:], np.full((n, 1), np.inf)], axis=1)
        rows = np.arange(n)
        for c in range(cols):
            lo = np.maximum(self.jump_times[:, c], a)
            hi = np.minimum(ends[:, c], b)
            np.add.at(occ, (rows, self.states[:, c]), np.clip(hi - lo, 0.0, None))
        return occ

    def to_paths(self) -> list[CtmcPath]:
        out = []
        for r in range(self.states.shape[0]):
            k = int(self.n_jumps[r]) + 1
            out.append(CtmcPath(tuple(float(x) for x in self.jump_times[r, :k]),
                                tuple(int(s) + 1 for s in self.states[r, :k]), self.horizon))
        return out


def _cumulative(kernel: NDArray) -> NDArray:
    cum = np.cumsum(kernel, axis=1)
    cum[:, -1] = 1.0
    return cum


def _next_states(cum: NDArray, current: NDArray, u: NDArray) -> NDArray:
    return (u[:, None] >= cum[current]).sum(axis=1).astype(np.int64)


def simulate_ctmc(G: GeneratorMatrix, T: float, n: int, rng: np.random.Generator,
                  y0: int = 1) -> PathBatch:
    """``n`` independent exact paths on ``[0, T]`` started from state ``y0`` (1-based)."""
    cum = _cumulative(G.jump_kernel)
    t = np.zeros(n)
    s = np.full(n, y0 - 1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    taus, sts = [np.zeros(n)], [s.copy()]
    counts = np.zeros(n, dtype=np.int64)
    while alive.any():
        hold = rng.exponential(1.0, size=n) / G.exit_rates[s]
        u = rng.random(n)
        t_new = t + hold
        jump = alive & (t_new < T)
        s_new = np.where(jump, _next_states(cum, s, u), s)
        t = np.where(jump, t_new, t)
        s = s_new
        counts += jump
        taus.append(np.where(jump, t_new, np.inf))
        sts.append(s.copy())
        alive = jump
    return PathBatch(np.stack(taus[:-1], axis=1), np.stack(sts[:-1], axis=1), counts, float(T))


def sample_jump_counts(G: GeneratorMatrix, T: float, n: int, rng: np.random.Generator,
                       y0: int = 1) -> NDArray[np.int64]:
    """Number of jumps ``N_T`` of ``n`` independent paths."""
    cum = _cumulative(G.jump_kernel)
    t = np.zeros(n)
    s = np.full(n, y0 - 1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    counts = np.zeros(n, dtype=np.int64)
    while alive.any():
        hold = rng.exponential(1.0, size=n) / G.exit_rates[s]
        u = rng.random(n)
        t = t + hold
        alive &= t < T
        s = np.where(alive, _next_states(cum, s, u), s)
        counts += alive
    return counts


# -- jump-count moment generating function ----------------------------------

def mgf_bound(G: GeneratorMatrix, T: float, alpha: float) -> float:
    """``exp(-lambda_* T) + Lambda exp(alpha + e^alpha lambda^* T)``."""
    return math.exp(-G.lambda_lower * T) + G.rate_ratio * math.exp(alpha + math.exp(alpha) * G.lambda_upper * T)


def jump_count_mgf_check(G: GeneratorMatrix, T: float, alphas, trials: int,
                         seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1,
                         y0: int = 1) -> ConvergenceReport:
    """Monte Carlo ``E exp(alpha N_T)`` against the exponential-moment bound.

    An entry passes when the estimate does not exceed the bound and, for
    constant exit rates (where ``N_T`` is Poisson(lambda T)), lies within
    3 SE of the Poisson MGF.  Otherwise the oracle is left empty.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 10^4")
    sub = as_subseed(seed).child("mgf")
    # one shared sample of N_T for every alpha, concatenated in block order
    all_counts = np.concatenate(map_blocks(lambda rng, n: sample_jump_counts(G, T, n, rng, y0),
                                           trials, sub, threads))
    entries = []
    for alpha in alphas:
        alpha = float(alpha)
        vals = np.exp(alpha * all_counts)
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(vals.size))
        bound = mgf_bound(G, T, alpha)
        oracle = math.exp(G.exit_rates[0] * T * math.expm1(alpha)) if G.is_constant_rate else None
        err = None if oracle is None else abs(mean - oracle)
        ok = mean <= bound and (err is None or err <= 3 * se)
        entries.append(Entry(alpha, mean, se, oracle, err, bound, ok))
    return ConvergenceReport(
        name="jump_count_mgf",
        key_name="alpha",
        entries=entries,
        passed=all(e.passed for e in entries),
        criterion=("estimate <= exp(-lambda_* T) + Lambda exp(alpha + e^alpha lambda^* T); "
                   "within 3 SE of the Poisson MGF when exit rates are constant"),
        notes={"T": T, "trials": trials, "mean_jump_count": float(all_counts.mean()),
               "mean_jump_count_se": float(all_counts.std(ddof=1) / math.sqrt(all_counts.size))},
    )


# -- scaled jump-time law ----------------------------------------------------

def jump_time_density(G: GeneratorMatrix, t_points, T: float, y0: int = 1) -> float:
    """Density of the first m jump times on the event of exactly m jumps.

    Exact sum over state sequences ``y0 = j_0 != j_1 != ... != j_m``:
    ``prod_i lambda_{j_i j_{i+1}} * exp(-sum_i lambda_{j_i} (t_{i+1} - t_i))``
    with ``t_0 = 0`` and ``t_{m+1} = T``.
    """
    t = [0.0] + [float(x) for x in t_points] + [float(T)]
    m = len(t_points)
    lam, rates = G.exit_rates, G.off_diag
    total = 0.0
    for seq in itertools.product(range(G.d), repeat=m):
        path = (y0 - 1,) + seq
        if any(a == b for a, b in zip(path, path[1:])):
            continue
        w = 1.0
        for i in range(m):
            w *= rates[path[i], path[i + 1]]
        w *= math.exp(-sum(lam[path[i]] * (t[i + 1] - t[i]) for i in range(m + 1)))
        total += w
    return total


def discrete_jump_probability(P: NDArray, ks, N: int, y0: int = 1) -> float:
    """``P(tau_1 = k_1, ..., tau_m = k_m, tau_{m+1} > N)`` for a chain with one-step matrix P.

    Exact sum over state sequences; the chain stays put with probability
    ``P[i, i]`` per step, so a sub-stochastic diagonal can be evaluated too.
    """
    m = len(ks)
    k = [0] + [int(x) for x in ks]
    stay = np.diag(P)
    total = 0.0
    for seq in itertools.product(range(P.shape[0]), repeat=m):
        path = (y0 - 1,) + seq
        if any(a == b for a, b in zip(path, path[1:])):
            continue
        w = 1.0
        for i in range(m):
            w *= stay[path[i]] ** (k[i + 1] - k[i] - 1) * P[path[i], path[i + 1]]
        w *= stay[path[m]] ** (N - k[m])
        total += w
    return total


def _check_jump_points(grid: TimeGrid, m: int, t_points) -> list[int]:
    if m not in (1, 2):
        raise UnsupportedOrder(m)
    if len(t_points) != m:
        raise ValueError(f"expected {m} time points, got {len(t_points)}")
    ks = []
    for t in t_points:
        if not 0 < t < grid.T:
            raise BadTimePoint(t, f"must lie strictly inside (0, {grid.T})")
        k = grid.index(t)
        if k == 0 or k >= grid.N - 1:
            raise BadTimePoint(t, f"falls in the first or last grid cell (k={k}, N={grid.N})")
        ks.append(k)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise BadTimePoint(t_points[-1], "time points map to non-increasing grid indices")
    return ks


def jump_law_compare(G: GeneratorMatrix, grid: TimeGrid, m: int, t_points, trials: int,
                     seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1,
                     abs_tol: float = 0.02) -> ConvergenceReport:
    """Scaled discrete jump-time law ``(N/T)^m p_N(k_1..k_m)`` against ``g_m(t_1..t_m)``.

    ``p_N`` is estimated by Monte Carlo over the N-step chain (row-stochastic
    matrix).  The exact value of ``p_N`` for the same chain, and the
    alternative ``(N/T)^(m+1)`` scaling, are recorded in the notes.
    """
    from .discrete_scheme import sample_discrete_jumps

    ks = _check_jump_points(grid, m, t_points)
    P, _ = discrete_transition_matrix(G, grid, Variant.ROW_STOCHASTIC)
    target = np.array(ks)
    N, scale = grid.N, grid.N / grid.T

    def sampler(rng, n):
        times, _ = sample_discrete_jumps(P, n, m + 1, rng)
        hit = np.all(times[:, :m] == target[None, :], axis=1) & (times[:, m] > N)
        return hit.astype(float)

    est = mc_mean(sampler, trials, as_subseed(seed).child("jump_law", m, N), threads)
    g = jump_time_density(G, t_points, grid.T)
    exact = discrete_jump_probability(P, ks, N)
    paper_P, _ = discrete_transition_matrix(G, grid, Variant.PAPER_DIAGONAL)
    scaled = scale ** m * est.value
    se = scale ** m * est.std_error
    err = abs(scaled - g)
    entry = Entry(N, scaled, se, g, err, passed=err <= abs_tol)
    return ConvergenceReport(
        name=f"jump_law_m{m}",
        entries=[entry],
        passed=bool(entry.passed),
        criterion=f"|(N/T)^m p_N - g_m| <= {abs_tol}",
        notes={
            "t_points": list(t_points), "k": ks, "trials": trials,
            "p_hat": est.value, "p_hat_se": est.std_error,
            "exact_scaled": scale ** m * exact,
            "exact_error": abs(scale ** m * exact - g),
            "paper_diagonal_scaled": scale ** m * discrete_jump_probability(paper_P, ks, N),
            "scaled_m_plus_1": scale ** (m + 1) * est.value,
            "exact_scaled_m_plus_1": scale ** (m + 1) * exact,
        },
    )


def jump_law_convergence(G: GeneratorMatrix, T: float, n_grid, m: int, t_points, trials: int,
                         seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1,
                         abs_tol: float = 0.02) -> ConvergenceReport:
    """:func:`jump_law_compare` over an N-grid, with both candidate scalings.

    Passes when the largest-N Monte Carlo value is within ``abs_tol`` of
    ``g_m``, the exact discrete errors strictly decrease, and the Monte Carlo
    errors do not increase wherever they exceed 5 SE.
    """
    singles = [jump_law_compare(G, TimeGrid(T, N), m, t_points, trials, seed, threads, abs_tol)
               for N in n_grid]
    entries = [r.entries[0] for r in singles]
    exact_err = [r.notes["exact_error"] for r in singles]
    exact_m1 = [r.notes["exact_scaled_m_plus_1"] for r in singles]
    growth = -decay_order(n_grid, exact_m1) if len(n_grid) >= 3 else None
    exact_decreasing = all(b < a for a, b in zip(exact_err, exact_err[1:]))
    mc_ok = resolved_monotone([e.error for e in entries], [e.std_error for e in entries])
    g = entries[0].oracle
    return ConvergenceReport(
        name=f"jump_law_m{m}",
        entries=entries,
        passed=bool(entries[-1].passed) and exact_decreasing and mc_ok,
        criterion=(f"largest-N |(N/T)^m p_N - g_m| <= {abs_tol}; exact discrete error strictly "
                   "decreasing; MC error non-increasing where resolved (> 5 SE)"),
        decay_order=decay_order(n_grid, exact_err) if len(n_grid) >= 3 else None,
        notes={
            "g_m": g,
            "t_points": list(t_points),
            "trials": trials,
            "exact_scaled": [r.notes["exact_scaled"] for r in singles],
            "exact_error": exact_err,
            "exact_error_strictly_decreasing": exact_decreasing,
            "mc_error_monotone_where_resolved": mc_ok,
            "scaling_m": [e.estimate for e in entries],
            "scaling_m_plus_1": [r.notes["scaled_m_plus_1"] for r in singles],
            "exact_scaling_m_plus_1": exact_m1,
            "scaling_m_plus_1_growth_order": growth,
            "scaling_m_plus_1_diverges": bool(growth is not None and growth > 0.5
                                              and all(b > a for a, b in zip(exact_m1, exact_m1[1:]))),
        },
    )
