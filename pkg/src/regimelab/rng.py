"""Counter-based random streams and block-parallel Monte Carlo aggregation.

Every random draw in the package comes from a Philox generator keyed by a
``numpy.random.SeedSequence`` built from ``entropy=master_seed`` and
``spawn_key=(stream_id, *subkeys)``.  Monte Carlo estimators split their
trials into fixed-size blocks; block ``b`` always uses subkey ``b``, so an
estimate depends only on ``(master_seed, stream_id, subkeys, trials)`` and not
on how many worker threads evaluate the blocks or in which order they finish.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

BLOCK_SIZE = 1 << 14
DEFAULT_SEED = 12345


def tag(name: str) -> int:
    """Stable 32-bit integer for a string subkey."""
    return zlib.crc32(name.encode("utf-8"))


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int = DEFAULT_SEED
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        if self.stream_id < 0:
            raise ValueError("stream_id must be non-negative")

    def _key(self, subkeys) -> tuple[int, ...]:
        return (self.stream_id,) + tuple(tag(k) if isinstance(k, str) else int(k) for k in subkeys)

    def generator(self, *subkeys: int | str) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self._key(subkeys))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *subkeys: int | str) -> "SubSeed":
        """Seed namespace for one statistic; blocks below it get their own streams."""
        return SubSeed(self, self._key(subkeys)[1:])

    def stream(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id)


@dataclass(frozen=True)
class SubSeed:
    parent: SeedSpec
    subkeys: tuple[int, ...]

    def generator(self, *more: int | str) -> np.random.Generator:
        return self.parent.generator(*self.subkeys, *more)

    def child(self, *more: int | str) -> "SubSeed":
        return SubSeed(self.parent, self.subkeys + self.parent._key(more)[1:])


def as_subseed(seed: SeedSpec | SubSeed) -> SubSeed:
    return seed if isinstance(seed, SubSeed) else seed.child()


def block_sizes(trials: int, block_size: int = BLOCK_SIZE) -> list[int]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(trials, block_size)
    return [block_size] * full + ([rest] if rest else [])


def map_blocks(fn: Callable[[np.random.Generator, int], object], trials: int,
               seed: SeedSpec | SubSeed, threads: int = 1,
               block_size: int = BLOCK_SIZE) -> list:
    """Evaluate ``fn(rng, n)`` on every block; results are returned in block order."""
    sub = as_subseed(seed)
    sizes = block_sizes(trials, block_size)

    def run(b):
        return fn(sub.generator("block", b), sizes[b])

    if threads <= 1 or len(sizes) == 1:
        return [run(b) for b in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, range(len(sizes))))


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo mean with standard error(s).

    For complex samples ``std_error`` refers to the real part and
    ``std_error_imag`` to the imaginary part.
    """

    value: float | complex
    std_error: float
    n: int
    std_error_imag: float = 0.0

    @property
    def is_complex(self) -> bool:
        return isinstance(self.value, complex)

    def modulus_se(self, center: complex = 0j) -> float:
        """Delta-method SE of ``|value - center|`` (componentwise independence assumed)."""
        z = complex(self.value) - center
        r = abs(z)
        if r == 0.0:
            return math.hypot(self.std_error, self.std_error_imag)
        return math.hypot(z.real * self.std_error, z.imag * self.std_error_imag) / r


def _moments(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return np.array([x.size, x.real.sum(), x.imag.sum(),
                         np.square(x.real).sum(), np.square(x.imag).sum()])
    x = x.astype(float)
    return np.array([x.size, x.sum(), 0.0, np.square(x).sum(), 0.0])


def _finish(total: np.ndarray, is_complex: bool) -> Estimate:
    n = int(total[0])
    mean_re, mean_im = total[1] / n, total[2] / n

    def se(s1, s2):
        if n < 2:
            return float("nan")
        var = max(s2 - s1 * s1 / n, 0.0) / (n - 1)
        return math.sqrt(var / n)

    if is_complex:
        return Estimate(complex(mean_re, mean_im), se(total[1], total[3]), n, se(total[2], total[4]))
    return Estimate(float(mean_re), se(total[1], total[3]), n)


def mc_mean(sampler: Callable[[np.random.Generator, int], np.ndarray], trials: int,
            seed: SeedSpec | SubSeed, threads: int = 1) -> Estimate:
    """Mean and SE of the samples returned by ``sampler(rng, n)`` over all blocks."""
    flags = []

    def fn(rng, n):
        x = np.asarray(sampler(rng, n))
        flags.append(np.iscomplexobj(x))
        return _moments(x)

    parts = map_blocks(fn, trials, seed, threads)
    return _finish(np.sum(np.stack(parts), axis=0), any(flags))


def mc_means(sampler: Callable[[np.random.Generator, int], np.ndarray], trials: int,
             seed: SeedSpec | SubSeed, threads: int = 1) -> list[Estimate]:
    """Like :func:`mc_mean` for samplers returning an ``(n, k)`` array of k statistics."""
    flags = []

    def fn(rng, n):
        x = np.asarray(sampler(rng, n))
        flags.append(np.iscomplexobj(x))
        return np.stack([_moments(x[:, c]) for c in range(x.shape[1])])

    parts = map_blocks(fn, trials, seed, threads)
    total = np.sum(np.stack(parts), axis=0)
    cplx = any(flags)
    return [_finish(total[c], cplx) for c in range(total.shape[0])]
