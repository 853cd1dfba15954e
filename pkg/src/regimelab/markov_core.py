"""Generator, regime parameters, time grid and transition kernels of the switching chain."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, pdtrc

from .errors import (NegativeRate, NonSquare, RowMismatch, ToleranceNotReached,
                     ZeroExitRate, ZeroRate, ModelInvalid)
from .reports import ConvergenceReport, Entry, decay_order

DEFAULT_TOL = 1e-12


def _frozen(a: ArrayLike, dtype=float) -> NDArray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GeneratorMatrix:
    """Finite generator of the switching process.

    Attributes
    ----------
    off_diag : (d, d) array
        Jump rates ``lambda_ij``; the diagonal is stored as zero.
    exit_rates : (d,) array
        ``lambda_i``, the row sums of ``off_diag``.
    allow_zero_rates : bool
        Whether structural zeros among the off-diagonal rates were permitted.
    """

    off_diag: NDArray[np.float64]
    exit_rates: NDArray[np.float64]
    allow_zero_rates: bool = False

    @property
    def d(self) -> int:
        return self.off_diag.shape[0]

    @property
    def lambda_lower(self) -> float:
        return float(self.exit_rates.min())

    @property
    def lambda_upper(self) -> float:
        return float(self.exit_rates.max())

    @property
    def rate_ratio(self) -> float:
        return self.lambda_upper / self.lambda_lower

    @property
    def q(self) -> NDArray[np.float64]:
        """Full generator with ``-lambda_i`` on the diagonal."""
        return self.off_diag - np.diag(self.exit_rates)

    @property
    def jump_kernel(self) -> NDArray[np.float64]:
        """Transition matrix of the embedded chain, ``lambda_ij / lambda_i``."""
        return self.off_diag / self.exit_rates[:, None]

    @property
    def is_constant_rate(self) -> bool:
        return bool(np.all(self.exit_rates == self.exit_rates[0]))


def validate_generator(raw_rates: ArrayLike, tolerance: float = DEFAULT_TOL,
                       allow_zero_rates: bool = False) -> GeneratorMatrix:
    """Build a :class:`GeneratorMatrix` from a square matrix of rates.

    The diagonal of ``raw_rates`` may be left at zero; a non-zero diagonal
    must equal minus the row sum of the off-diagonal rates within
    ``tolerance`` (relative to the exit rate).
    """
    a = np.asarray(raw_rates, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
        raise NonSquare(a.shape)
    if not np.all(np.isfinite(a)):
        raise ModelInvalid("rates must be finite")
    d = a.shape[0]
    off = a.copy()
    np.fill_diagonal(off, 0.0)
    for i in range(d):
        for j in range(d):
            if i != j and off[i, j] < 0:
                raise NegativeRate(i + 1, j + 1, off[i, j])
    exit_rates = off.sum(axis=1)
    for i in range(d):
        if exit_rates[i] <= 0:
            raise ZeroExitRate(i + 1)
    for i in range(d):
        diag = a[i, i]
        if diag != 0.0 and abs(diag + exit_rates[i]) > tolerance * max(1.0, exit_rates[i]):
            raise RowMismatch(i + 1, diag, -exit_rates[i])
    if not allow_zero_rates:
        for i in range(d):
            for j in range(d):
                if i != j and off[i, j] == 0:
                    raise ZeroRate(i + 1, j + 1)
    return GeneratorMatrix(_frozen(off), _frozen(exit_rates), allow_zero_rates)


@dataclass(frozen=True)
class RegimeParams:
    """Per-state drifts and volatilities plus the initial price.

    ``degenerate=True`` admits zero volatilities; such parameter sets are only
    meant as deterministic test fixtures.
    """

    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]
    x0: float
    degenerate: bool = False
    mu_bound: float = field(init=False)
    sigma_bound: float = field(init=False)

    def __post_init__(self):
        mu = _frozen(self.mu)
        sigma = _frozen(self.sigma)
        if mu.ndim != 1 or mu.shape != sigma.shape or mu.size == 0:
            raise ModelInvalid("mu and sigma must be 1-d sequences of equal, non-zero length")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ModelInvalid("mu and sigma must be finite")
        if self.degenerate:
            if np.any(sigma < 0):
                raise ModelInvalid("volatilities must be non-negative")
        elif np.any(sigma <= 0):
            raise ModelInvalid("volatilities must be strictly positive (degenerate=False)")
        if not self.x0 > 0:
            raise ModelInvalid("initial price x0 must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "mu_bound", float(np.max(np.abs(mu))))
        object.__setattr__(self, "sigma_bound", float(np.max(sigma)))

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def log_x0(self) -> float:
        return math.log(self.x0)

    @property
    def log_drift(self) -> NDArray[np.float64]:
        """``mu_j - sigma_j**2 / 2``, the drift of the log-price in state j."""
        return self.mu - 0.5 * self.sigma ** 2

    def check_states(self, G: GeneratorMatrix) -> None:
        if G.d != self.d:
            raise ModelInvalid(f"generator has {G.d} states but regime parameters have {self.d}")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def step(self) -> float:
        return self.T / self.N

    def index(self, t: float) -> int:
        """Grid index ``k`` with ``t`` in ``[k T/N, (k+1) T/N)``; ``index(T) == N``.

        Values within 1e-9 (relative) of a grid point snap to it, so that
        e.g. ``t = 0.29, N = 100`` maps to 29 despite ``0.29 * 100 < 29``.
        """
        if t < 0 or t > self.T * (1 + 1e-12):
            raise ValueError(f"time {t} outside [0, {self.T}]")
        x = t * self.N / self.T
        r = round(x)
        if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
            return min(int(r), self.N)
        return min(int(math.floor(x)), self.N)

    def grid_time(self, t: float) -> float:
        return self.index(t) * self.step

    def with_steps(self, N: int) -> "TimeGrid":
        return TimeGrid(self.T, N)


class Variant(str, enum.Enum):
    PAPER_DIAGONAL = "paper"
    ROW_STOCHASTIC = "stochastic"


def transition_matrix(G: GeneratorMatrix, t: float, tol: float = DEFAULT_TOL,
                      max_terms: int | None = None) -> NDArray[np.float64]:
    """``P(t) = exp(t A)`` by uniformization.

    With ``q = lambda^*`` and ``K = I + A / q`` (entrywise non-negative),
    ``P(t) = sum_n Pois(n; q t) K^n``; the series stops once the remaining
    Poisson tail mass drops below ``tol``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    d = G.d
    if t == 0:
        return np.eye(d)
    q = G.lambda_upper
    qt = q * t
    if max_terms is None:
        max_terms = int(10 * (qt * d + 50))
    K = np.eye(d) + G.q / q
    np.clip(K, 0.0, None, out=K)
    log_qt = math.log(qt)
    P = np.zeros((d, d))
    power = np.eye(d)
    n = 0
    while True:
        w = math.exp(-qt + n * log_qt - gammaln(n + 1))
        P += w * power
        tail = pdtrc(n, qt)
        if tail < tol:
            break
        n += 1
        if n > max_terms:
            raise ToleranceNotReached(n, tail)
        power = power @ K
    return P


def discrete_transition_matrix(G: GeneratorMatrix, grid: TimeGrid,
                               variant: Variant | str = Variant.ROW_STOCHASTIC,
                               tol: float = DEFAULT_TOL):
    """One-step matrix of the N-step switching chain and its row deficits.

    Off-diagonal entries are ``p_ij(T/N)``.  ``PAPER_DIAGONAL`` puts
    ``exp(-lambda_i T/N)`` on the diagonal, which leaves row i short by
    ``p_ii(T/N) - exp(-lambda_i T/N)`` (returned as the deficit vector);
    ``ROW_STOCHASTIC`` keeps ``p_ii(T/N)`` and has zero deficits.
    """
    variant = Variant(variant)
    P = transition_matrix(G, grid.step, tol)
    if variant is Variant.ROW_STOCHASTIC:
        return P, np.zeros(G.d)
    stay = np.exp(-G.exit_rates * grid.step)
    deficit = np.diag(P) - stay
    M = P.copy()
    np.fill_diagonal(M, stay)
    return M, deficit


def rate_asymptotics_check(G: GeneratorMatrix, n_grid, T: float = 1.0,
                           tol: float = 1e-14, order_tolerance: float = 0.2) -> ConvergenceReport:
    """Check ``(N/T) p_ij(T/N) -> lambda_ij`` and ``p_ij(T/N) <= lambda_i T/N``.

    The report passes when the majorization holds for every N, the errors
    strictly decrease, and (with three or more grid points) the fitted decay
    order lies within ``order_tolerance`` of 1.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 2 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid needs at least two strictly increasing values")
    off = ~np.eye(G.d, dtype=bool)
    entries, errors, deficits = [], [], []
    for N in n_grid:
        h = T / N
        P = transition_matrix(G, h, tol)
        scaled = P / h
        err = float(np.max(np.abs(scaled - G.off_diag)[off]))
        major = bool(np.all(P[off] <= (G.exit_rates[:, None] * h * np.ones(G.d))[off]))
        deficit = np.diag(P) - np.exp(-G.exit_rates * h)
        deficits.append({"N": N, "max_deficit": float(deficit.max()),
                         "deficit_over_step_sq": float(deficit.max() / h ** 2)})
        errors.append(err)
        entries.append(Entry(N, float(np.max(scaled[off])), 0.0, float(np.max(G.off_diag[off])),
                             err, passed=major))
    order = decay_order(n_grid, errors) if len(n_grid) >= 3 else None
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    ok = all(e.passed for e in entries) and decreasing
    if order is not None:
        ok = ok and abs(order - 1.0) <= order_tolerance
    return ConvergenceReport(
        name="rate_asymptotics",
        entries=entries,
        passed=ok,
        criterion=(f"p_ij <= lambda_i T/N for all N; max|(N/T)p_ij - lambda_ij| strictly decreasing; "
                   f"decay order 1 +/- {order_tolerance}"),
        decay_order=order,
        notes={"T": T, "majorization": [e.passed for e in entries], "deficits": deficits},
    )
