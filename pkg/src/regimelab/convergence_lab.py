"""Discrete-scheme statistics against continuous-model oracles, over grids of N."""

from __future__ import annotations

import itertools
import math

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm
from scipy.ndimage import maximum_filter1d, minimum_filter1d
from scipy.special import gammaln, logsumexp

from .ctmc_sim import PathBatch, simulate_ctmc
from .discrete_scheme import (Convention, ReturnFamily, _chain_matrix, chain_states_at, counts_cf,
                              discrete_cf, discrete_cf_exact, sample_terminal_log_price,
                              simulate_log_paths)
from .limit_sim import (CfSpec, black_scholes_call, gaussian_block_cf, limit_cf, limit_cf_exact,
                        path_cf_functional, price_european_call)
from .markov_core import GeneratorMatrix, RegimeParams, TimeGrid, transition_matrix
from .reports import ConvergenceReport, Entry, TightnessReport, decay_order, resolved_monotone
from .rng import SeedSpec, SubSeed, as_subseed, map_blocks, mc_mean, mc_means


def _order(n_grid, errors, ses=None):
    return decay_order(n_grid, errors, ses) if len(n_grid) >= 3 else None


def _check_grid(n_grid) -> list[int]:
    n_grid = [int(n) for n in n_grid]
    if not n_grid or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be non-empty and strictly increasing")
    return n_grid


# -- transition kernel -----------------------------------------------------------

def two_state_transition(G: GeneratorMatrix, t: float) -> NDArray[np.float64]:
    """Closed form of ``exp(tA)`` for two states."""
    if G.d != 2:
        raise ValueError("closed form needs d = 2")
    a, b = G.off_diag[0, 1], G.off_diag[1, 0]
    lam = a + b
    e = math.exp(-lam * t)
    return np.array([[b + a * e, a - a * e], [b - b * e, a + b * e]]) / lam


def kernel_check(G: GeneratorMatrix, times=(0.1, 0.5, 1.0, 10.0), n_pairs: int = 20,
                 seed: SeedSpec = SeedSpec(), tol: float = 1e-10) -> ConvergenceReport:
    """Uniformization against a closed form (two states) or ``scipy.linalg.expm``, plus the semigroup law."""
    entries = []
    for t in times:
        P = transition_matrix(G, t)
        ref = two_state_transition(G, t) if G.d == 2 else expm(G.q * t)
        err = float(np.max(np.abs(P - ref)))
        entries.append(Entry(float(t), float(P[0, 0]), 0.0, float(ref[0, 0]), err, tol, err <= tol))
    rng = seed.generator("semigroup")
    semigroup = []
    for s, t in rng.uniform(0.0, 5.0, size=(n_pairs, 2)):
        lhs = transition_matrix(G, s + t)
        semigroup.append(float(np.max(np.abs(lhs - transition_matrix(G, s) @ transition_matrix(G, t)))))
    worst = max(semigroup) if semigroup else 0.0
    return ConvergenceReport(
        name="kernel_exactness", entries=entries, key_name="t",
        passed=all(e.passed for e in entries) and worst <= tol,
        criterion=f"uniformization vs {'closed form' if G.d == 2 else 'expm'} and semigroup within {tol}",
        notes={"semigroup_max_error": worst, "semigroup_pairs": n_pairs},
    )


# -- finite-dimensional distributions of the chain ------------------------------

def chained_probability(G: GeneratorMatrix, times, states, y0: int = 1) -> float:
    """``P(Y_{t_1} = x_1, ..., Y_{t_n} = x_n)`` by the Markov property (states 1-based)."""
    prob, prev_t, prev_s = 1.0, 0.0, y0
    for t, x in zip(times, states):
        prob *= transition_matrix(G, t - prev_t)[prev_s - 1, x - 1]
        prev_t, prev_s = t, x
    return float(prob)


def _chain_power_probability(P: NDArray, ks, states, y0: int = 1) -> float:
    prob, prev_k, prev_s = 1.0, 0, y0
    for k, x in zip(ks, states):
        prob *= np.linalg.matrix_power(P, k - prev_k)[prev_s - 1, x - 1]
        prev_k, prev_s = k, x
    return float(prob)


def fdd_compare(G: GeneratorMatrix, times, states, n_grid, trials: int, T: float = 1.0,
                seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1,
                abs_tol: float = 0.01) -> ConvergenceReport:
    """Monte Carlo joint probabilities of the discrete chain at ``t^(N)_i`` against the continuous chain at ``t_i``.

    An entry passes when its error is at most ``max(3 SE, abs_tol)``.  The
    exact discrete probability (matrix powers) and a Chapman-Kolmogorov
    consistency residual are kept in the notes.
    """
    n_grid = _check_grid(n_grid)
    times = [float(t) for t in times]
    states = [int(x) for x in states]
    if len(times) != len(states) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted and match states")
    if any(not 1 <= x <= G.d for x in states):
        raise ValueError("state out of range")
    oracle = chained_probability(G, times, states)
    # Chapman-Kolmogorov: summing the chained product over the intermediate state
    ck = []
    for a, b in zip(times, times[1:]):
        direct = transition_matrix(G, b)
        via = transition_matrix(G, a) @ transition_matrix(G, b - a)
        ck.append(float(np.max(np.abs(direct - via))))
    entries, exact = [], []
    label = "fdd[" + ",".join(f"{t!r}:{x}" for t, x in zip(times, states)) + "]"
    for N in n_grid:
        grid = TimeGrid(T, N)
        ks = [grid.index(t) for t in times]
        P = _chain_matrix(G, grid)
        target = np.array(states) - 1

        def sampler(rng, n, P=P, ks=ks):
            return np.all(chain_states_at(P, ks, n, rng) == target[None, :], axis=1).astype(float)

        if max(ks) == 0:
            est_value, se = float(all(x == 1 for x in states)), 0.0
        else:
            est = mc_mean(sampler, trials, as_subseed(seed).child("fdd", label, N), threads)
            est_value, se = est.value, est.std_error
        err = abs(est_value - oracle)
        bound = max(3 * se, abs_tol)
        entries.append(Entry(N, est_value, se, oracle, err, bound, err <= bound))
        exact.append(_chain_power_probability(P, ks, states))
    mono = resolved_monotone([e.error for e in entries], [e.std_error for e in entries])
    return ConvergenceReport(
        name=label, entries=entries,
        passed=all(e.passed for e in entries) and mono,
        criterion=f"|p_N - p| <= max(3 SE, {abs_tol}) at every N; errors non-increasing where resolved",
        decay_order=_order(n_grid, [e.error for e in entries], [e.std_error for e in entries]),
        notes={"times": times, "states": states, "trials": trials,
               "exact_discrete": exact,
               "exact_discrete_error": [abs(x - oracle) for x in exact],
               "chapman_kolmogorov_residual": max(ck) if ck else 0.0},
    )


# -- characteristic functions ----------------------------------------------------

def skeleton_block_counts(batch: PathBatch, grid: TimeGrid, ks, d: int,
                          convention: Convention | str = Convention.END) -> NDArray[np.int64]:
    """Per-block step counts of the skeleton chain ``Y_{kT/N}`` of continuous paths, shape ``(n, blocks, d)``.

    The skeleton has exactly the law of the discrete chain driven by the
    row-stochastic matrix, so this couples the two models on one path.
    """
    h = grid.step
    start = batch.jump_times
    stop = np.concatenate([start[:, 1:], np.full((start.shape[0], 1), np.inf)], axis=1)
    # grid indices k with k h in [start, stop)
    lo = np.ceil(start / h)
    hi = np.where(np.isinf(stop), np.inf, np.ceil(stop / h) - 1)
    shift = 0 if Convention(convention) is Convention.END else 1
    n, cols = start.shape
    counts = np.zeros((n, len(ks) - 1, d), dtype=np.int64)
    rows = np.arange(n)
    for b in range(len(ks) - 1):
        a_lo, a_hi = ks[b] + 1 - shift, ks[b + 1] - shift
        for c in range(cols):
            m = np.minimum(hi[:, c], a_hi) - np.maximum(lo[:, c], a_lo) + 1
            m = np.where(np.isfinite(start[:, c]), np.clip(m, 0, None), 0)
            np.add.at(counts[:, b, :], (rows, batch.states[:, c]), m.astype(np.int64))
    return counts


def coupled_cf_samples(G: GeneratorMatrix, family: ReturnFamily, spec: CfSpec, n: int,
                       rng: np.random.Generator,
                       convention: Convention | str = Convention.END) -> NDArray[np.complex128]:
    """Columns: discrete conditional CF on the skeleton, limit conditional CF, their difference."""
    grid = family.grid
    ks = [0] + [grid.index(t) for t in spec.times]
    batch = simulate_ctmc(G, grid.T, n, rng)
    psi = np.stack([family.log_cf(a) for a in spec.alphas])
    disc = counts_cf(skeleton_block_counts(batch, grid, ks, G.d, convention), psi)
    lim = path_cf_functional(batch, family.params, spec)
    return np.stack([disc, lim, disc - lim], axis=1)


def cf_convergence(G: GeneratorMatrix, family: ReturnFamily, spec: CfSpec, n_grid, trials: int,
                   seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1, tolerance: float = 0.03,
                   convention: Convention | str = Convention.END,
                   independent: bool = True) -> ConvergenceReport:
    """Distance ``|CF^(N) - CF_limit|`` over an N-grid.

    The primary estimate couples the two models on shared switching paths:
    the discrete chain is the skeleton of the continuous one and both
    return/Brownian parts are integrated analytically given the path, so
    the paired difference has a small variance.  With ``independent=True``
    the independent empirical discrete CF and the independent limit CF are
    reported too.  Exact values (transfer matrix and matrix exponential)
    are kept in the notes.

    Passes when the largest-N paired distance is below ``3 SE + tolerance``,
    the paired distances strictly decrease (unless all are exactly zero),
    and, if computed, the independent distance at the largest N is below
    ``3 SE + tolerance``.
    """
    n_grid = _check_grid(n_grid)
    params = family.params
    params.check_states(G)
    sub = as_subseed(seed)
    label = "cf[" + ";".join(f"{a!r}@{t!r}" for a, t in zip(spec.alphas, spec.times)) + "]"
    exact_limit = limit_cf_exact(G, params, spec)
    entries, dist_se, exact_dist, indep = [], [], [], []
    lim_ind = None
    if independent:
        lim_ind = limit_cf(G, params, spec, trials, family.grid.T, sub.child("cf_limit", label), threads)
    for N in n_grid:
        fam = family.with_steps(N)
        if spec.is_zero:
            disc = lim = diff = None
            d_val, d_se = 0.0, 0.0
            entries.append(Entry(N, 1 + 0j, 0.0, 1 + 0j, 0.0, tolerance, True, 0.0))
        else:
            disc, lim, diff = mc_means(
                lambda rng, n, fam=fam: coupled_cf_samples(G, fam, spec, n, rng, convention),
                trials, sub.child("cf_coupled", label, N), threads)
            d_val, d_se = abs(diff.value), diff.modulus_se()
            entries.append(Entry(N, disc.value, disc.std_error, lim.value, d_val,
                                 3 * d_se + tolerance, d_val < 3 * d_se + tolerance, disc.std_error_imag))
        dist_se.append(d_se)
        exact_dist.append(abs(discrete_cf_exact(G, fam, spec, convention) - exact_limit))
        if independent:
            est = discrete_cf(G, fam, spec, trials, sub.child("cf_empirical", label), "empirical",
                              convention, threads)
            se = math.hypot(est.modulus_se(lim_ind.value), lim_ind.modulus_se(est.value))
            dist = abs(est.value - lim_ind.value)
            indep.append({"N": N, "estimate": est.value, "se_re": est.std_error,
                          "se_im": est.std_error_imag, "distance": dist, "distance_se": se,
                          "pass": dist < 3 * se + tolerance})
    dists = [e.error for e in entries]
    all_zero = all(x == 0.0 for x in dists)
    decreasing = all_zero or all(b < a for a, b in zip(dists, dists[1:]))
    ok = bool(entries[-1].passed) and decreasing and (not indep or indep[-1]["pass"])
    notes = {
        "spec": {"alphas": list(spec.alphas), "times": list(spec.times)},
        "trials": trials, "convention": Convention(convention).value,
        "paired_distance_se": dist_se,
        "paired_distances_strictly_decreasing": decreasing,
        "exact_limit_cf": exact_limit,
        "exact_distance": exact_dist,
    }
    if independent:
        notes["independent_limit_cf"] = {"value": lim_ind.value, "se_re": lim_ind.std_error,
                                         "se_im": lim_ind.std_error_imag}
        notes["independent_discrete_cf"] = indep
    return ConvergenceReport(
        name=label, entries=entries, passed=ok,
        criterion=(f"largest-N |CF_N - CF| < 3 SE + {tolerance} (paired and independent); "
                   "paired distances strictly decreasing"),
        decay_order=_order(n_grid, dists, dist_se), notes=notes,
    )


def cf_rate_check(params: RegimeParams, family: ReturnFamily, s: float, t: float, alphas, n_grid,
                  band_factor: float = 4.0, method: str = "exact", trials: int = 100_000,
                  seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1) -> ConvergenceReport:
    """``sup_j Delta_j^(N)(s, t) / gamma_N`` over an N-grid, for a fixed regime j (no switching).

    ``Delta_j^(N) = |E exp(i alpha sum_k log(1 + R_{k,j})) - phi_{j,s,t}(alpha)|`` where the
    sum runs over the ``k_t - k_s`` steps between the grid images of s and t.
    ``method="exact"`` evaluates the discrete CF as ``psi_j(alpha)^(k_t - k_s)``;
    ``method="empirical"`` estimates it from sampled shock counts.  The
    constant C is fitted as the largest ratio; the report passes when the
    ratios stay within a factor ``band_factor``.
    """
    n_grid = _check_grid(n_grid)
    if not s < t:
        raise ValueError("need s < t")
    alphas = [float(a) for a in np.atleast_1d(alphas)]
    sub = as_subseed(seed)
    ratios, deltas, gammas, ses = [], [], [], []
    for N in n_grid:
        fam = family.with_steps(N)
        n_steps = fam.grid.index(t) - fam.grid.index(s)
        worst, worst_se = 0.0, 0.0
        for a in alphas:
            psi = fam.log_cf(a)
            for j in range(params.d):
                target = gaussian_block_cf(params, j + 1, s, t, a)
                if method == "exact":
                    val, se = complex(psi[j] ** n_steps), 0.0
                elif method == "empirical":
                    est = mc_mean(lambda rng, n, fam=fam, j=j, a=a: np.exp(
                        1j * a * (rng.multinomial(n_steps, fam.probabilities, size=n) @ fam.log_support[j])),
                        trials, sub.child("cf_rate", N, j, repr(a)), threads)
                    val, se = est.value, est.modulus_se(target)
                else:
                    raise ValueError(f"unknown method {method!r}")
                delta = abs(val - target)
                if delta >= worst:
                    worst, worst_se = delta, se
        deltas.append(worst)
        ses.append(worst_se)
        gammas.append(fam.gamma_N)
        ratios.append(worst / fam.gamma_N)
    C = max(ratios)
    band = 1.0 if C == 0.0 else (C / min(ratios) if min(ratios) > 0 else math.inf)
    entries = [Entry(N, r, se / g, None, dlt, C * g, dlt <= C * g * (1 + 1e-12))
               for N, r, dlt, g, se in zip(n_grid, ratios, deltas, gammas, ses)]
    return ConvergenceReport(
        name="cf_rate", entries=entries,
        passed=all(e.passed for e in entries) and band < band_factor,
        criterion=f"sup_j Delta_j / gamma_N within a factor {band_factor} band; Delta <= C gamma_N",
        decay_order=_order(n_grid, deltas, ses),
        notes={"method": method, "s": s, "t": t, "alphas": alphas, "fitted_C": C,
               "band_ratio": band, "gamma_N": gammas, "sup_delta": deltas,
               "residuals": [C * g - dlt for g, dlt in zip(gammas, deltas)]},
    )


# -- tightness -----------------------------------------------------------------

def modulus_of_continuity(u: NDArray, lag: int) -> NDArray[np.float64]:
    """``max_{|k - l| <= lag} |u_k - u_l|`` per row: the largest range over windows of ``lag + 1`` points."""
    size = min(lag + 1, u.shape[1])
    if size <= 1:
        return np.zeros(u.shape[0])
    origin = (size - 1) // 2 - (size - 1)  # window [k, k + size)
    hi = maximum_filter1d(u, size, axis=1, mode="nearest", origin=origin)
    lo = minimum_filter1d(u, size, axis=1, mode="nearest", origin=origin)
    return (hi - lo)[:, : u.shape[1] - size + 1].max(axis=1)


def modulus_lag(delta: float, grid: TimeGrid) -> int:
    """Largest index gap of ``floor(tN/T)`` and ``floor(sN/T)`` with ``|t - s| < delta``."""
    x = delta / grid.step
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return int(math.ceil(x))


def tightness_diagnostics(G: GeneratorMatrix, family: ReturnFamily, n_grid, c_grid, delta_grid,
                          epsilon: float, trials: int, seed: SeedSpec | SubSeed = SeedSpec(),
                          threads: int = 1, convention: Convention | str = Convention.END,
                          diagnostic: tuple[int, float, float] | None = None,
                          chunk: int = 2048) -> TightnessReport:
    """Tail probabilities of ``sup_t |U_t - log x0|`` and of the modulus ``omega_delta(U)`` per N.

    All tails at one N come from one shared sample, so monotonicity in c
    and in delta is exact.  ``diagnostic=(N, delta, threshold)`` adds a check
    that the modulus tail at that cell is below the threshold.
    """
    n_grid = _check_grid(n_grid)
    c_grid = sorted(float(c) for c in c_grid)
    delta_grid = sorted(float(x) for x in delta_grid)
    if not c_grid or not delta_grid:
        raise ValueError("c_grid and delta_grid must be non-empty")
    sub = as_subseed(seed)
    c_tail, mod_tail, hard, hard_tail, stated, stated_tail, ranges_ok = {}, {}, {}, {}, {}, {}, True
    for N in n_grid:
        fam = family.with_steps(N)
        P = _chain_matrix(G, fam.grid)
        lags = [modulus_lag(dl, fam.grid) for dl in delta_grid]

        def block(rng, n, fam=fam, P=P, lags=lags):
            sups, mods, rngs = [], [], []
            for lo in range(0, n, chunk):
                _, u = simulate_log_paths(P, fam, min(chunk, n - lo), rng, convention)
                u = u - fam.params.log_x0
                sups.append(np.abs(u).max(axis=1))
                mods.append(np.stack([modulus_of_continuity(u, L) for L in lags], axis=1))
                rngs.append(u.max(axis=1) - u.min(axis=1))
            return np.concatenate(sups), np.concatenate(mods), np.concatenate(rngs)

        parts = map_blocks(block, trials, sub.child("tightness", N), threads)
        sup = np.concatenate([p[0] for p in parts])
        mod = np.concatenate([p[1] for p in parts])
        full = np.concatenate([p[2] for p in parts])
        for c in c_grid:
            c_tail[(N, c)] = float(np.mean(sup >= c))
        for i, dl in enumerate(delta_grid):
            mod_tail[(N, dl)] = float(np.mean(mod[:, i] >= epsilon))
            if dl >= fam.grid.T:
                ranges_ok &= bool(np.array_equal(mod[:, i], full))
        hard[N] = -N * math.log1p(-fam.gamma_N)
        hard_tail[N] = float(np.mean(sup >= hard[N] * (1 + 1e-12)))
        stated[N] = N * math.log1p(fam.gamma_N)
        stated_tail[N] = float(np.mean(sup >= stated[N]))
    checks = {
        "c_tail_nonincreasing_in_c": all(
            c_tail[(N, b)] <= c_tail[(N, a)] for N in n_grid for a, b in zip(c_grid, c_grid[1:])),
        "modulus_tail_nondecreasing_in_delta": all(
            mod_tail[(N, b)] >= mod_tail[(N, a)] for N in n_grid for a, b in zip(delta_grid, delta_grid[1:])),
        "hard_bound_tail_zero": all(v == 0.0 for v in hard_tail.values()),
        "stated_bound_tail_zero": all(v == 0.0 for v in stated_tail.values()),
        "full_window_equals_range": ranges_ok,
    }
    notes = {"stated_bound": stated, "stated_bound_tail": stated_tail,
             "convention": Convention(convention).value}
    if diagnostic is not None:
        dN, dd, thr = diagnostic
        if (dN, dd) in mod_tail:
            checks["diagnostic_modulus_tail"] = mod_tail[(dN, dd)] < thr
            notes["diagnostic"] = {"N": dN, "delta": dd, "epsilon": epsilon, "threshold": thr,
                                   "tail": mod_tail[(dN, dd)]}
    return TightnessReport(n_grid, c_tail, mod_tail, epsilon, hard, hard_tail, trials, checks, notes)


# -- pricing -------------------------------------------------------------------

def _single_regime(params: RegimeParams) -> bool:
    return bool(np.all(params.mu == params.mu[0]) and np.all(params.sigma == params.sigma[0]))


def discrete_call_exact(family: ReturnFamily, strike: float) -> float:
    """Exact discrete call price for a single effective regime (sum over shock counts)."""
    if not _single_regime(family.params):
        raise ValueError("exact discrete price needs a single effective regime")
    N = family.grid.N
    logs = family.log_support[0]
    p = family.probabilities
    m = logs.size
    # enumerate counts (c_1, ..., c_{m-1}); c_m = N - sum
    total = []
    weights = []
    for head in itertools.product(range(N + 1), repeat=m - 2):
        rest = N - sum(head)
        if rest < 0:
            continue
        a = np.arange(rest + 1)
        cnt = np.stack([np.full(a.size, c) for c in head] + [a, rest - a], axis=0)
        lw = (gammaln(N + 1) - gammaln(cnt + 1).sum(axis=0) + (cnt * np.log(p)[:, None]).sum(axis=0))
        total.append(cnt.T @ logs)
        weights.append(lw)
    lu = np.concatenate(total) + family.params.log_x0
    lw = np.concatenate(weights)
    pay = np.exp(lu) - strike
    keep = pay > 0
    if not keep.any():
        return 0.0
    return float(np.exp(logsumexp(lw[keep], b=pay[keep])))


def price_convergence(G: GeneratorMatrix, family: ReturnFamily, strike: float, n_grid, trials: int,
                      seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1,
                      abs_tol: float = 0.15, limit_trials: int | None = None,
                      convention: Convention | str = Convention.END) -> ConvergenceReport:
    """Discrete call price ``E (X_N - K)^+`` per N against the limit price.

    The limit price is the Black-Scholes closed form for a single effective
    regime and a Monte Carlo estimate otherwise.  Passes when the largest-N
    error is at most ``3 SE + abs_tol`` and errors do not increase where
    resolved.
    """
    n_grid = _check_grid(n_grid)
    if not strike >= 0:
        raise ValueError("strike must be non-negative")
    params = family.params
    params.check_states(G)
    sub = as_subseed(seed)
    T = family.grid.T
    single = _single_regime(params)
    if single:
        oracle = black_scholes_call(params.x0, strike, float(params.sigma[0]), T, float(params.mu[0]))
        oracle_se = 0.0
    else:
        est = price_european_call(G, params, strike, limit_trials or trials, T, sub.child("price_limit"),
                                  threads)
        oracle, oracle_se = est.value, est.std_error
    entries, exact = [], []
    for N in n_grid:
        fam = family.with_steps(N)
        P = _chain_matrix(G, fam.grid)
        est = mc_mean(lambda rng, n, fam=fam, P=P: np.maximum(
            np.exp(sample_terminal_log_price(P, fam, n, rng, convention)) - strike, 0.0),
            trials, sub.child("price_discrete", N), threads)
        se = math.hypot(est.std_error, oracle_se)
        err = abs(est.value - oracle)
        entries.append(Entry(N, est.value, est.std_error, oracle, err, 3 * se + abs_tol,
                             err <= 3 * se + abs_tol))
        if single:
            exact.append(discrete_call_exact(fam, strike))
    errs = [e.error for e in entries]
    ses = [math.hypot(e.std_error, oracle_se) for e in entries]
    notes = {"strike": strike, "trials": trials, "oracle_se": oracle_se,
             "oracle_kind": "black_scholes" if single else "limit_monte_carlo"}
    if single:
        notes["exact_discrete"] = exact
        notes["exact_discrete_error"] = [abs(x - oracle) for x in exact]
    return ConvergenceReport(
        name=f"call_price[K={strike!r}]", entries=entries,
        passed=bool(entries[-1].passed) and resolved_monotone(errs, ses),
        criterion=f"largest-N |price_N - price| <= 3 SE + {abs_tol}; errors non-increasing where resolved",
        decay_order=_order(n_grid, errs, ses), notes=notes,
    )
