"""The N-step multiplicative market: switching chain, net profit rates, discrete log-price."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .limit_sim import CfSpec
from .markov_core import (GeneratorMatrix, RegimeParams, TimeGrid, Variant,
                          discrete_transition_matrix)
from .reports import ConvergenceReport, Entry, decay_order
from .rng import Estimate, SeedSpec, SubSeed, as_subseed, mc_mean


class FamilyKind(str, enum.Enum):
    BINOMIAL = "binomial"
    TRINOMIAL = "trinomial"


class Convention(str, enum.Enum):
    """Which chain state drives the return of step k: ``Y_k`` (end) or ``Y_{k-1}`` (start)."""

    END = "end"
    START = "start"


_SHOCKS = {
    FamilyKind.BINOMIAL: (np.array([-1.0, 1.0]), np.array([0.5, 0.5]), 1.0),
    FamilyKind.TRINOMIAL: (np.array([-1.0, 0.0, 1.0]), np.full(3, 1.0 / 3.0), 1.5),
}


@dataclass(frozen=True)
class ReturnFamily:
    """Net profit rates ``R_{k,j} = mu_j h + sigma_j sqrt(c h) eps`` with ``h = T/N``.

    Binomial: ``eps = +-1`` equiprobable, ``c = 1``.  Trinomial:
    ``eps in {-1, 0, 1}`` equiprobable, ``c = 3/2``.  Both have variance
    ``sigma_j^2 h``.  Construction fails unless ``gamma_N < 1``.
    """

    kind: FamilyKind
    params: RegimeParams
    grid: TimeGrid
    gamma_N: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        h = self.grid.step
        _, _, c = _SHOCKS[self.kind]
        gamma = self.params.mu_bound * h + self.params.sigma_bound * math.sqrt(c * h)
        if not gamma < 1.0:
            raise ValueError(f"gamma_N = {gamma:.4g} >= 1 (N = {self.grid.N} too small); "
                             "returns could reach -1")
        object.__setattr__(self, "gamma_N", gamma)

    @property
    def probabilities(self) -> NDArray[np.float64]:
        return _SHOCKS[self.kind][1]

    @property
    def support(self) -> NDArray[np.float64]:
        """Possible values of ``R_{k,j}``, shape ``(d, m)``."""
        eps, _, c = _SHOCKS[self.kind]
        h = self.grid.step
        return self.params.mu[:, None] * h + self.params.sigma[:, None] * math.sqrt(c * h) * eps[None, :]

    @property
    def log_support(self) -> NDArray[np.float64]:
        return np.log1p(self.support)

    def mean(self) -> NDArray[np.float64]:
        return self.support @ self.probabilities

    def variance(self) -> NDArray[np.float64]:
        dev = self.support - self.mean()[:, None]
        return (dev ** 2) @ self.probabilities

    def log_cf(self, alpha: float) -> NDArray[np.complex128]:
        """``E exp(i alpha log(1 + R_{k,j}))`` per state."""
        return np.exp(1j * alpha * self.log_support) @ self.probabilities

    def with_steps(self, N: int) -> "ReturnFamily":
        return ReturnFamily(self.kind, self.params, self.grid.with_steps(N))

    def draw_indices(self, shape, rng: np.random.Generator) -> NDArray[np.int64]:
        return rng.integers(0, self.probabilities.size, size=shape)


def sample_returns(family: ReturnFamily, j: int, k: int, seed: SeedSpec = SeedSpec()) -> float:
    """One draw of ``R_{k,j}`` (j 1-based); draws for distinct ``(k, j)`` use distinct streams."""
    if not 1 <= j <= family.params.d:
        raise ValueError("state out of range")
    if not 1 <= k <= family.grid.N:
        raise ValueError("step out of range")
    rng = seed.generator("returns", k, j)
    return float(family.support[j - 1, family.draw_indices((), rng)])


# -- the switching chain -------------------------------------------------------

def _chain_matrix(G: GeneratorMatrix, grid: TimeGrid) -> NDArray[np.float64]:
    P, _ = discrete_transition_matrix(G, grid, Variant.ROW_STOCHASTIC)
    return P


def simulate_chains(P: NDArray, N: int, n: int, rng: np.random.Generator, y0: int = 1,
                    steps: int | None = None) -> NDArray[np.int64]:
    """``n`` chains of ``steps`` (default N) transitions, row by row; 0-based, shape ``(n, steps+1)``."""
    steps = N if steps is None else steps
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    out = np.empty((n, steps + 1), dtype=np.int64)
    out[:, 0] = y0 - 1
    for k in range(1, steps + 1):
        u = rng.random(n)
        out[:, k] = (u[:, None] >= cum[out[:, k - 1]]).sum(axis=1)
    return out


def _row_cdf(P: NDArray) -> NDArray:
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    return cum


def chain_states_at(P: NDArray, ks, n: int, rng: np.random.Generator, y0: int = 1) -> NDArray[np.int64]:
    """States (0-based) at the sorted indices ``ks`` of n chains, shape ``(n, len(ks))``.

    Only the current state is kept while stepping.
    """
    ks = [int(k) for k in ks]
    cum = _row_cdf(P)
    s = np.full(n, y0 - 1, dtype=np.int64)
    out = np.empty((n, len(ks)), dtype=np.int64)
    k = 0
    for c, target in enumerate(ks):
        while k < target:
            s = (rng.random(n)[:, None] >= cum[s]).sum(axis=1)
            k += 1
        out[:, c] = s
    return out


def chain_block_counts(P: NDArray, ks, n: int, rng: np.random.Generator,
                       convention: Convention | str = Convention.END, y0: int = 1) -> NDArray[np.int64]:
    """Steps of block ``(ks[b], ks[b+1]]`` driven by each state, shape ``(n, blocks, d)``."""
    end = Convention(convention) is Convention.END
    cum = _row_cdf(P)
    d = P.shape[0]
    rows = np.arange(n)
    s = np.full(n, y0 - 1, dtype=np.int64)
    counts = np.zeros((n, len(ks) - 1, d), dtype=np.int64)
    for b in range(len(ks) - 1):
        for _ in range(ks[b], ks[b + 1]):
            nxt = (rng.random(n)[:, None] >= cum[s]).sum(axis=1)
            counts[rows, b, nxt if end else s] += 1
            s = nxt
    return counts


def log_block_increments(P: NDArray, family: ReturnFamily, ks, n: int, rng: np.random.Generator,
                         convention: Convention | str = Convention.END, y0: int = 1) -> NDArray[np.float64]:
    """``U_{ks[b+1]} - U_{ks[b]}`` of n fully simulated discrete paths, shape ``(n, blocks)``."""
    end = Convention(convention) is Convention.END
    cum = _row_cdf(P)
    log_sup = family.log_support
    s = np.full(n, y0 - 1, dtype=np.int64)
    out = np.zeros((n, len(ks) - 1))
    for b in range(len(ks) - 1):
        for _ in range(ks[b], ks[b + 1]):
            nxt = (rng.random(n)[:, None] >= cum[s]).sum(axis=1)
            out[:, b] += log_sup[nxt if end else s, family.draw_indices(n, rng)]
            s = nxt
    return out


def sample_discrete_chain(G: GeneratorMatrix, grid: TimeGrid, seed: SeedSpec = SeedSpec(),
                          y0: int = 1) -> NDArray[np.int64]:
    """One chain ``Y_0..Y_N`` (1-based states, ``Y_0 = y0``) from the row-stochastic matrix."""
    P = _chain_matrix(G, grid)
    return simulate_chains(P, grid.N, 1, seed.generator("discrete_chain"), y0)[0] + 1


def _holding_law(P: NDArray) -> tuple[NDArray, NDArray]:
    """``log P_ii`` (computed as ``log1p(-leave_i)``) and the cumulative jump kernel."""
    off = np.array(P, dtype=float)
    np.fill_diagonal(off, 0.0)
    leave = off.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(leave[:, None] > 0, off / leave[:, None], 0.0)
    cum = np.cumsum(kernel, axis=1)
    cum[:, -1] = 1.0
    return np.log1p(-leave), cum


def _hold_and_move(log_stay, cum, s, rng, cap):
    u = 1.0 - rng.random(s.size)
    v = rng.random(s.size)
    with np.errstate(divide="ignore"):
        hold = np.ceil(np.log(u) / log_stay[s])
    hold = np.clip(np.nan_to_num(hold, nan=cap, posinf=cap), 1, cap).astype(np.int64)
    return hold, (v[:, None] >= cum[s]).sum(axis=1)


def sample_discrete_jumps(P: NDArray, n: int, n_jumps: int, rng: np.random.Generator,
                          y0: int = 1, cap: int = 2**40) -> tuple[NDArray[np.int64], NDArray[np.int64]]:
    """First ``n_jumps`` jump indices of n chains via geometric holding times.

    Returns ``(times, states)`` with shapes ``(n, n_jumps)`` and
    ``(n, n_jumps + 1)`` (0-based states, ``states[:, 0] = y0 - 1``).
    Holding times are capped at ``cap`` steps.
    """
    log_stay, cum = _holding_law(P)
    s = np.full(n, y0 - 1, dtype=np.int64)
    t = np.zeros(n, dtype=np.int64)
    times = np.empty((n, n_jumps), dtype=np.int64)
    states = np.empty((n, n_jumps + 1), dtype=np.int64)
    states[:, 0] = s
    for c in range(n_jumps):
        hold, s = _hold_and_move(log_stay, cum, s, rng, cap)
        t = np.minimum(t + hold, cap)
        times[:, c] = t
        states[:, c + 1] = s
    return times, states


# -- discrete log-price paths --------------------------------------------------

@dataclass(frozen=True)
class DiscretePath:
    """Chain states ``Y_0..Y_N`` (1-based) and log-prices ``U_0..U_N``."""

    grid: TimeGrid
    chain_states: tuple[int, ...]
    u_values: tuple[float, ...]

    def __post_init__(self):
        if len(self.chain_states) != self.grid.N + 1 or len(self.u_values) != self.grid.N + 1:
            raise ValueError("path length must be N + 1")

    @property
    def jump_times(self) -> tuple[int, ...]:
        """Discrete jump indices ``tau_0 = 0 < tau_1 < ...``."""
        y = self.chain_states
        return (0,) + tuple(k for k in range(1, len(y)) if y[k] != y[k - 1])

    @property
    def occupation_times(self) -> tuple[int, ...]:
        tau = self.jump_times
        return tuple(b - a for a, b in zip(tau, tau[1:]))

    def at(self, t: float) -> float:
        """``U_t = U_{floor(t N / T)}`` (piecewise constant, right-continuous)."""
        return self.u_values[self.grid.index(t)]

    def state_at(self, t: float) -> int:
        return self.chain_states[self.grid.index(t)]

    def csv_rows(self, trial: int) -> list[tuple]:
        return [(trial, k, s, repr(float(u))) for k, (s, u) in enumerate(zip(self.chain_states, self.u_values))]


def step_states(chains: NDArray, convention: Convention | str) -> NDArray:
    """State driving each step 1..N: ``Y_k`` (end) or ``Y_{k-1}`` (start)."""
    return chains[:, 1:] if Convention(convention) is Convention.END else chains[:, :-1]


def simulate_log_paths(P: NDArray, family: ReturnFamily, n: int, rng: np.random.Generator,
                       convention: Convention | str = Convention.END) -> tuple[NDArray, NDArray]:
    """Chains (0-based) and log-prices for n independent paths, each of shape ``(n, N+1)``.

    The chain is drawn first, then the shock indices, so chain and returns
    are independent.
    """
    N = family.grid.N
    chains = simulate_chains(P, N, n, rng)
    shocks = family.draw_indices((n, N), rng)
    log_r = family.log_support[step_states(chains, convention), shocks]
    u = np.empty((n, N + 1))
    u[:, 0] = family.params.log_x0
    np.cumsum(log_r, axis=1, out=u[:, 1:])
    u[:, 1:] += family.params.log_x0
    return chains, u


def sample_discrete_path(G: GeneratorMatrix, family: ReturnFamily, seed: SeedSpec = SeedSpec(),
                         convention: Convention | str = Convention.END) -> DiscretePath:
    family.params.check_states(G)
    P = _chain_matrix(G, family.grid)
    chains, u = simulate_log_paths(P, family, 1, seed.generator("discrete_path"), convention)
    return DiscretePath(family.grid, tuple(int(s) + 1 for s in chains[0]), tuple(float(x) for x in u[0]))


def step_counts(P: NDArray, N: int, n: int, rng: np.random.Generator,
                convention: Convention | str = Convention.END, y0: int = 1) -> NDArray[np.int64]:
    """Steps (out of N) each path spends driven by each state, shape ``(n, d)``.

    Uses geometric holding times, so the cost grows with the number of jumps
    rather than with N.
    """
    log_stay, cum = _holding_law(P)
    lo, hi = (1, N) if Convention(convention) is Convention.END else (0, N - 1)
    counts = np.zeros((n, P.shape[0]), dtype=np.int64)
    rows = np.arange(n)
    start = np.zeros(n, dtype=np.int64)
    s = np.full(n, y0 - 1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    while alive.any():
        hold, nxt_state = _hold_and_move(log_stay, cum, s, rng, 2 * N + 2)
        nxt = start + hold
        span = np.minimum(nxt - 1, hi) - np.maximum(start, lo) + 1
        np.add.at(counts, (rows, s), np.where(alive, np.clip(span, 0, None), 0))
        alive &= nxt <= hi
        start = nxt
        s = nxt_state
    return counts


def sample_terminal_log_price(P: NDArray, family: ReturnFamily, n: int, rng: np.random.Generator,
                              convention: Convention | str = Convention.END) -> NDArray[np.float64]:
    """``U_N`` for n paths, drawn from per-state step counts and multinomial shock counts."""
    counts = step_counts(P, family.grid.N, n, rng, convention)
    out = np.full(n, family.params.log_x0)
    log_sup = family.log_support
    for j in range(counts.shape[1]):
        shocks = rng.multinomial(counts[:, j], family.probabilities)
        out += shocks @ log_sup[j]
    return out


# -- conditions on the return family -------------------------------------------

def verify_conditions(family: ReturnFamily, t_checkpoints, n_grid=None,
                      T_tol: float = 1e-14) -> list[ConvergenceReport]:
    """Bounds, mean compounding and variance accumulation of the return family over an N-grid.

    Returns three kinds of report: ``gamma_N`` (bound, must decrease to 0 and
    dominate every support point), ``mean_compounding`` (max_j
    ``|(1 + mu_j^(N))^N - exp(mu_j T)|``) and one ``variance_sum[t=...]`` per
    checkpoint, comparing ``sup_j |sum_{i <= floor(Nt/T)} Var R_{i,j} - sigma_j^2 t|``
    with ``sigma_j^2 (t - floor(Nt/T) T/N)``.
    """
    n_grid = [family.grid.N] if n_grid is None else sorted({int(n) for n in n_grid})
    fams = [family.with_steps(N) for N in n_grid]
    T = family.grid.T
    params = family.params

    g_entries = []
    for f in fams:
        bounded = bool(np.all(np.abs(f.support) <= f.gamma_N * (1 + 1e-12)) and np.all(f.support > -1))
        g_entries.append(Entry(f.grid.N, f.gamma_N, 0.0, 0.0, f.gamma_N, passed=bounded))
    gam = [e.estimate for e in g_entries]
    gamma_report = ConvergenceReport(
        name="gamma_N", entries=g_entries,
        passed=all(e.passed for e in g_entries) and all(b < a for a, b in zip(gam, gam[1:])),
        criterion="|R| <= gamma_N and R > -1 on the support; gamma_N strictly decreasing",
        decay_order=decay_order(n_grid, gam) if len(n_grid) >= 3 else None,
    )

    c_entries = []
    target = np.exp(params.mu * T)
    for f in fams:
        comp = (1.0 + f.mean()) ** f.grid.N
        gaps = np.abs(comp - target)
        j = int(np.argmax(gaps))
        c_entries.append(Entry(f.grid.N, float(comp[j]), 0.0, float(target[j]), float(gaps[j])))
    gaps = [e.error for e in c_entries]
    comp_report = ConvergenceReport(
        name="mean_compounding", entries=c_entries,
        passed=all(b <= a for a, b in zip(gaps, gaps[1:])),
        criterion="max_j |(1 + mu_j^(N))^N - exp(mu_j T)| non-increasing in N",
        decay_order=decay_order(n_grid, gaps) if len(n_grid) >= 3 else None,
        notes={"mean_independent_of_step": True},
    )

    reports = [gamma_report, comp_report]
    sig2 = params.sigma ** 2
    for t in t_checkpoints:
        entries, mismatch = [], []
        for f in fams:
            k = f.grid.index(t)
            var = f.variance()
            sums = np.array([math.fsum([v] * k) for v in var])
            err = np.abs(sums - sig2 * t)
            analytic = sig2 * (t - k * f.grid.step)
            j = int(np.argmax(err))
            diff = float(np.max(np.abs(err - analytic)))
            mismatch.append(diff)
            entries.append(Entry(f.grid.N, float(sums[j]), 0.0, float(sig2[j] * t), float(err[j]),
                                 bound=float(np.max(sig2) * f.grid.step), passed=diff <= T_tol))
        reports.append(ConvergenceReport(
            name=f"variance_sum[t={t!r}]", entries=entries,
            passed=all(e.passed for e in entries) and all(e.error <= e.bound * (1 + 1e-12) for e in entries),
            criterion=(f"sup_j error equals sigma_j^2 (t - floor(Nt/T) T/N) within {T_tol}, "
                       "and is at most sigma^2 T/N"),
            notes={"analytic_mismatch": mismatch},
        ))
    return reports


# -- characteristic functions of the discrete scheme ---------------------------

def _block_indices(grid: TimeGrid, spec: CfSpec) -> list[int]:
    return [0] + [grid.index(t) for t in spec.times]


def discrete_cf(G: GeneratorMatrix, family: ReturnFamily, spec: CfSpec, trials: int,
                seed: SeedSpec | SubSeed = SeedSpec(), method: str = "empirical",
                convention: Convention | str = Convention.END, threads: int = 1) -> Estimate:
    """CF of the increments of ``U^(N)`` at the grid images of the spec times.

    ``method="empirical"`` averages ``exp(i sum_k alpha_k (U_{t_k} - U_{t_{k-1}}))``
    over fully simulated paths.  ``method="conditional"`` simulates only the
    chain and averages the exact conditional CF ``prod_k psi_{Y_k}(alpha_k)``
    of the returns given the chain.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 10^4")
    family.params.check_states(G)
    spec.check_horizon(family.grid.T)
    if spec.is_zero:
        return Estimate(1 + 0j, 0.0, trials, 0.0)
    grid = family.grid
    P = _chain_matrix(G, grid)
    ks = _block_indices(grid, spec)
    alphas = np.array(spec.alphas)
    sub = as_subseed(seed).child("discrete_cf", method, grid.N)

    if method == "empirical":
        def sampler(rng, n):
            return np.exp(1j * log_block_increments(P, family, ks, n, rng, convention) @ alphas)
    elif method == "conditional":
        psi = np.stack([family.log_cf(a) for a in spec.alphas])  # (blocks, d)

        def sampler(rng, n):
            return counts_cf(chain_block_counts(P, ks, n, rng, convention), psi)
    else:
        raise ValueError(f"unknown method {method!r}")
    return mc_mean(sampler, trials, sub, threads)


def counts_cf(counts: NDArray, psi: NDArray) -> NDArray[np.complex128]:
    """``prod_{b, j} psi[b, j] ** counts[:, b, j]``: the CF of the returns given the chain."""
    return np.prod(psi[None, :, :] ** counts, axis=(1, 2))


def discrete_cf_exact(G: GeneratorMatrix, family: ReturnFamily, spec: CfSpec,
                      convention: Convention | str = Convention.END, y0: int = 1) -> complex:
    """Deterministic discrete CF by a transfer-matrix product over the N steps."""
    grid = family.grid
    P = _chain_matrix(G, grid)
    ks = _block_indices(grid, spec)
    end = Convention(convention) is Convention.END
    v = np.zeros(G.d, dtype=complex)
    v[y0 - 1] = 1.0
    for b, alpha in enumerate(spec.alphas):
        D = family.log_cf(alpha)
        for _ in range(ks[b], ks[b + 1]):
            v = (v @ P) * D if end else (v * D) @ P
    return complex(v.sum())
