"""The continuous-time limit model: log-price sampling, characteristic functions, call prices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm
from scipy.stats import norm

from .ctmc_sim import CtmcPath, PathBatch, evaluate_path, simulate_ctmc
from .markov_core import GeneratorMatrix, RegimeParams
from .rng import Estimate, SeedSpec, SubSeed, as_subseed, mc_mean


@dataclass(frozen=True)
class LimitSample:
    times: tuple[float, ...]
    u_values: tuple[float, ...]

    @property
    def x_values(self) -> tuple[float, ...]:
        return tuple(math.exp(u) for u in self.u_values)

    def csv_rows(self, trial: int) -> list[tuple]:
        return [(trial, repr(t), repr(u), repr(math.exp(u))) for t, u in zip(self.times, self.u_values)]


@dataclass(frozen=True)
class CfSpec:
    """Frequencies ``alpha_1..alpha_n`` applied to increments over ``[t_{k-1}, t_k]``, ``t_0 = 0``."""

    alphas: tuple[float, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        t = tuple(float(x) for x in self.times)
        if len(a) < 1 or len(a) != len(t):
            raise ValueError("need n >= 1 frequencies and as many times")
        if t[0] < 0 or any(b < a_ for a_, b in zip(t, t[1:])):
            raise ValueError("times must be non-decreasing and non-negative")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "times", t)

    def check_horizon(self, T: float) -> None:
        if self.times[-1] > T * (1 + 1e-12):
            raise ValueError(f"spec time {self.times[-1]} beyond horizon {T}")

    @property
    def blocks(self) -> list[tuple[float, float, float]]:
        """``(start, end, alpha)`` per increment."""
        starts = (0.0,) + self.times[:-1]
        return list(zip(starts, self.times, self.alphas))

    @property
    def is_zero(self) -> bool:
        return all(a == 0.0 for a in self.alphas)


def gaussian_block_exponent(params: RegimeParams, alpha: float) -> NDArray[np.complex128]:
    """Per-state exponent ``-alpha^2 sigma_j^2 / 2 + i alpha (mu_j - sigma_j^2 / 2)`` (per unit time)."""
    return -0.5 * alpha ** 2 * params.sigma ** 2 + 1j * alpha * params.log_drift


def gaussian_block_cf(params: RegimeParams, j: int, s: float, t: float, alpha: float) -> complex:
    """CF at ``alpha`` of the single-regime log increment over ``[s, t]`` in state j (1-based)."""
    return complex(np.exp(gaussian_block_exponent(params, alpha)[j - 1] * (t - s)))


def sample_limit_fdd(path: CtmcPath, params: RegimeParams, times, seed: SeedSpec = SeedSpec()) -> LimitSample:
    """Exact sample of ``U_t`` at ``times`` given one switching path.

    The interval ``[0, max(times)]`` is cut at every jump and every requested
    time; each piece contributes its deterministic log drift plus an
    independent Gaussian increment with variance ``sigma_j^2 * length``.
    """
    times = [float(t) for t in times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("times must be sorted")
    if times and (times[0] < 0 or times[-1] > path.horizon):
        raise ValueError("times must lie in [0, T]")
    rng = seed.generator("limit_fdd")
    cuts = sorted(set([0.0] + [t for t in path.jump_times if times and t < times[-1]] + times))
    u = {0.0: params.log_x0}
    level = params.log_x0
    for a, b in zip(cuts, cuts[1:]):
        j = evaluate_path(path, a) - 1
        dt = b - a
        level += params.log_drift[j] * dt + params.sigma[j] * math.sqrt(dt) * rng.standard_normal()
        u[b] = level
    return LimitSample(tuple(times), tuple(u[t] for t in times))


def block_occupations(batch: PathBatch, spec_times, d: int) -> NDArray[np.float64]:
    """Occupation times, shape ``(n, blocks, d)``, for consecutive blocks ``[t_{k-1}, t_k]``."""
    edges = [0.0] + [float(t) for t in spec_times]
    return np.stack([batch.occupation(a, b, d) for a, b in zip(edges, edges[1:])], axis=1)


def sample_limit_increments(G: GeneratorMatrix, params: RegimeParams, times, T: float, n: int,
                            rng: np.random.Generator) -> NDArray[np.float64]:
    """Increments ``U_{t_k} - U_{t_{k-1}}`` (``t_0 = 0``) for n independent paths, shape ``(n, k)``.

    Conditionally on the occupation times the increment over a block is
    Gaussian with mean ``sum_j (mu_j - sigma_j^2/2) occ_j`` and variance
    ``sum_j sigma_j^2 occ_j``, which is sampled directly.
    """
    batch = simulate_ctmc(G, T, n, rng)
    occ = block_occupations(batch, times, G.d)
    mean = occ @ params.log_drift
    var = occ @ (params.sigma ** 2)
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


def path_cf_functional(batch: PathBatch, params: RegimeParams, spec: CfSpec) -> NDArray[np.complex128]:
    """``exp(int_0^T c(alpha(t), Y_t) dt)`` per path, integrated exactly over piecewise-constant pieces."""
    occ = block_occupations(batch, spec.times, params.d)
    expo = np.stack([gaussian_block_exponent(params, a) for a in spec.alphas])  # (blocks, d)
    return np.exp(np.einsum("nbd,bd->n", occ, expo))


def limit_cf(G: GeneratorMatrix, params: RegimeParams, spec: CfSpec, trials: int, T: float = 1.0,
             seed: SeedSpec | SubSeed = SeedSpec(), threads: int = 1) -> Estimate:
    """Monte Carlo over switching paths of the conditional (Gaussian-integrated) CF.

    Returns an :class:`Estimate` with complex value and componentwise SEs.
    """
    if trials < 10_000:
        raise ValueError("trials must be at least 10^4")
    params.check_states(G)
    spec.check_horizon(T)
    if spec.is_zero:
        return Estimate(1 + 0j, 0.0, trials, 0.0)

    def sampler(rng, n):
        return path_cf_functional(simulate_ctmc(G, T, n, rng), params, spec)

    return mc_mean(sampler, trials, as_subseed(seed).child("limit_cf"), threads)


def limit_cf_exact(G: GeneratorMatrix, params: RegimeParams, spec: CfSpec, y0: int = 1) -> complex:
    """Deterministic value of the limit CF via the Feynman-Kac matrix exponential.

    ``E_y0[exp(sum_k int_{block k} c_k(Y_s) ds)] = e_y0' prod_k exp((A + diag c_k) dt_k) 1``.
    """
    v = np.zeros(G.d, dtype=complex)
    v[y0 - 1] = 1.0
    for a, b, alpha in spec.blocks:
        if b > a:
            v = v @ expm((G.q + np.diag(gaussian_block_exponent(params, alpha))) * (b - a))
    return complex(v.sum())


def black_scholes_call(x0: float, strike: float, sigma: float, T: float, mu: float = 0.0) -> float:
    """``E (X_T - K)^+`` for a geometric Brownian motion with drift ``mu`` (no discounting)."""
    forward = x0 * math.exp(mu * T)
    if sigma == 0.0 or T == 0.0:
        return max(forward - strike, 0.0)
    if strike <= 0:
        return forward - strike
    s = sigma * math.sqrt(T)
    d1 = (math.log(forward / strike) + 0.5 * s * s) / s
    return forward * norm.cdf(d1) - strike * norm.cdf(d1 - s)


def price_european_call(G: GeneratorMatrix, params: RegimeParams, strike: float, trials: int,
                        T: float = 1.0, seed: SeedSpec | SubSeed = SeedSpec(),
                        threads: int = 1) -> Estimate:
    """Monte Carlo ``E max(X_T - K, 0)`` under the limit model."""
    if not strike >= 0:
        raise ValueError("strike must be non-negative")
    params.check_states(G)

    def sampler(rng, n):
        du = sample_limit_increments(G, params, [T], T, n, rng)[:, 0]
        return np.maximum(params.x0 * np.exp(du) - strike, 0.0)

    return mc_mean(sampler, trials, as_subseed(seed).child("limit_call"), threads)
