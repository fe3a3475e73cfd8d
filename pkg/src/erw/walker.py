"""Monte Carlo simulation of the excited random walk.

Each step consumes one uniform variate ``u`` from a PCG64 stream seeded with
the caller's seed, and the walker steps right iff ``u < p`` where ``p`` is the
strength of the cookie eaten on this visit (``1/2`` once the stack is empty).
The visit that triggers a step is counted, so the first step from a fresh
site uses ``p_1``.

Visit counts live in a dense array indexed relative to the starting site; it
is re-centred and doubled whenever the walk might leave it during the next
chunk of steps.  Counts saturate at ``M + 1`` since only ``count <= M``
matters.

Replicate ``r`` of a Monte Carlo run draws from the sub-seed
``replicate_seed(seed, r)``, a SplitMix64 mix of the master seed and the
replicate index.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .environment import CookieEnvironment
from .exceptions import HittingTimeout

CHUNK = 1 << 16
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class WalkResult:
    final_position: int
    steps: int
    min_position: int
    max_position: int


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    replicates: int
    steps_per_replicate: int
    seed: int
    final_positions: np.ndarray = field(repr=False, compare=False, default=None)
    replicate_seeds: tuple = field(repr=False, compare=False, default=())

    def as_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "replicates": self.replicates,
            "steps_per_replicate": self.steps_per_replicate,
            "seed": self.seed,
        }

    def rows(self):
        """CSV rows ``replicate, seed, steps, final_position, speed_estimate``."""
        n = self.steps_per_replicate
        for r, (s, x) in enumerate(zip(self.replicate_seeds, self.final_positions)):
            yield r, s, n, int(x), int(x) / n


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def replicate_seed(seed: int, replicate: int) -> int:
    """Stable 64-bit sub-seed for one replicate of a run."""
    return splitmix64(splitmix64(seed & _MASK64) ^ (replicate & _MASK64))


def step_probability(env: CookieEnvironment, visit_count: int) -> float:
    """Probability of a right step on visit number ``visit_count`` to a site."""
    if visit_count < 1:
        raise ValueError("visit_count counts the current visit and must be >= 1")
    return env.p[visit_count - 1] if visit_count <= env.M else 0.5


@njit(cache=True, nogil=True)
def _advance(counts, offset, pos, lo, hi, u, p, target):
    # returns (pos, lo, hi, steps_taken); stops early when pos reaches target
    M = p.shape[0]
    n = u.shape[0]
    for k in range(n):
        idx = pos + offset
        c = counts[idx] + 1
        if c <= M:
            q = p[c - 1]
            counts[idx] = c
        else:
            q = 0.5
            counts[idx] = M + 1
        if u[k] < q:
            pos += 1
            if pos > hi:
                hi = pos
        else:
            pos -= 1
            if pos < lo:
                lo = pos
        if pos == target:
            return pos, lo, hi, k + 1
    return pos, lo, hi, n


class _Walk:
    """Mutable walk state driven chunk by chunk."""

    def __init__(self, env: CookieEnvironment, seed: int, antithetic: bool = False):
        self.p = np.asarray(env.p, dtype=np.float64)
        self.rng = np.random.default_rng(seed)
        self.antithetic = antithetic
        self.counts = np.zeros(2 * CHUNK + 1, dtype=np.int32)
        self.offset = CHUNK
        self.pos = self.lo = self.hi = 0
        self.steps = 0

    def _ensure(self, reach: int):
        left = self.pos - reach + self.offset
        right = self.pos + reach + self.offset
        size = len(self.counts)
        if left >= 0 and right < size:
            return
        pad_left = max(0, -left)
        pad_right = max(0, right - size + 1)
        grow = max(size, pad_left + pad_right)
        extra_left = max(pad_left, grow // 2)
        extra_right = max(pad_right, grow - extra_left)
        new = np.zeros(size + extra_left + extra_right, dtype=np.int32)
        new[extra_left : extra_left + size] = self.counts
        self.counts = new
        self.offset += extra_left

    def run(self, steps: int, target: int | None = None) -> bool:
        """Advance up to ``steps`` steps; True if ``target`` was hit."""
        tgt = np.iinfo(np.int64).max if target is None else int(target)
        remaining = steps
        while remaining > 0:
            n = min(CHUNK, remaining)
            self._ensure(n)
            u = self.rng.random(n)
            if self.antithetic:
                u = 1.0 - u
            self.pos, self.lo, self.hi, taken = _advance(
                self.counts, self.offset, self.pos, self.lo, self.hi, u, self.p, tgt
            )
            self.steps += taken
            remaining -= taken
            if self.pos == tgt:
                return True
        return False


def simulate_walk(
    env: CookieEnvironment, steps: int, seed: int, antithetic: bool = False
) -> WalkResult:
    """Run one walk of ``steps`` steps from the origin.

    ``antithetic=True`` replaces each variate ``u`` by ``1 - u``; on the mirrored
    environment this reproduces the negated trajectory.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    w = _Walk(env, seed, antithetic)
    w.run(steps)
    return WalkResult(int(w.pos), steps, int(w.lo), int(w.hi))


def walk_reference(env: CookieEnvironment, steps: int, seed: int) -> WalkResult:
    """Slow dictionary-based walk on the same variate stream (for testing)."""
    rng = np.random.default_rng(seed)
    visits: dict[int, int] = {}
    pos = lo = hi = 0
    done = 0
    while done < steps:
        for u in rng.random(min(CHUNK, steps - done)):
            visits[pos] = visits.get(pos, 0) + 1
            pos += 1 if u < step_probability(env, visits[pos]) else -1
            lo, hi = min(lo, pos), max(hi, pos)
        done += min(CHUNK, steps - done)
    return WalkResult(pos, steps, lo, hi)


def hitting_time(
    env: CookieEnvironment, target: int, seed: int, step_cap: int = 10**8
) -> int:
    """First time the walk reaches site ``target``.

    Raises
    ------
    HittingTimeout
        If the site is not reached within ``step_cap`` steps.
    """
    if target < 1:
        raise ValueError("target must be a positive site")
    w = _Walk(env, seed)
    if not w.run(step_cap, target=target):
        raise HittingTimeout(target, step_cap, int(w.pos))
    return w.steps


def _default_threads() -> int:
    return os.cpu_count() or 1


def estimate_speed(
    env: CookieEnvironment,
    steps: int,
    replicates: int,
    seed: int,
    threads: int | None = None,
    antithetic: bool = False,
) -> MonteCarloEstimate:
    """Mean of ``X_n / n`` over independent replicates, with its standard error."""
    if steps < 1:
        raise ValueError("steps must be positive")
    if replicates < 2:
        raise ValueError("at least two replicates are needed for a standard error")
    seeds = tuple(replicate_seed(seed, r) for r in range(replicates))

    def one(s):
        return simulate_walk(env, steps, s, antithetic).final_position

    threads = threads or _default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            finals = list(pool.map(one, seeds))
    else:
        finals = [one(s) for s in seeds]
    finals = np.asarray(finals, dtype=np.int64)
    speeds = finals / steps
    mean = math.fsum(speeds) / replicates
    var = math.fsum((speeds - mean) ** 2) / (replicates - 1)
    return MonteCarloEstimate(
        mean=mean,
        std_error=math.sqrt(var / replicates),
        replicates=replicates,
        steps_per_replicate=steps,
        seed=seed,
        final_positions=finals,
        replicate_seeds=seeds,
    )
