"""Backward branching process of an excited random walk.

Coins ``xi_1, xi_2, ...`` are flipped independently, the ``j``-th with head
probability ``p_j`` for ``j <= M`` and ``1/2`` afterwards.  From state ``i`` the
chain jumps to the number of tails seen before the ``(i+1)``-st head, so

    p(i, j) = P(j tails precede the (i+1)-st head).

Rows are evaluated exactly: a dynamic program over the first ``M`` flips
tracks the head count, and every branch still open after those flips is closed
with the fair-coin negative binomial law.  Tail sums beyond a cut-off are added
in closed form, so row masses, means and generating functions carry no
truncation bias.
"""

from __future__ import annotations

import math
import threading
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.signal import lfilter
from scipy.special import nbdtrc

from .environment import CookieEnvironment

__all__ = [
    "ChainPath",
    "TransitionKernel",
    "binom",
    "mean_next",
    "nb_pmf",
    "pgf_next",
    "series_mean",
    "simulate_chain",
    "symmetric_closed_form",
    "transition_prob",
]

SERIES_TAIL_TOL = 1e-15


# ---------------------------------------------------------------------------
# Fair-coin negative binomial law: X = tails before the r-th head.


def binom(n: int, k: int) -> int:
    """Binomial coefficient with ``C(n, k) = 0`` outside ``0 <= k <= n``."""
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


def nb_pmf(t: int, r: int) -> float:
    """``P(X = t)`` for ``X`` the tails before the ``r``-th fair head.

    The coefficient ``C(t+r-1, t)`` is formed exactly; once it no longer fits
    in a double the evaluation switches to log-space.
    """
    if t < 0 or r < 0:
        return 0.0
    if r == 0:
        return 1.0 if t == 0 else 0.0
    c = math.comb(t + r - 1, t)
    if c.bit_length() <= 1000:
        return math.ldexp(float(c), -(t + r))
    logp = (
        math.lgamma(t + r) - math.lgamma(r) - math.lgamma(t + 1) - (t + r) * math.log(2.0)
    )
    return math.exp(logp)


def nb_sf(t: int, r: int) -> float:
    """``P(X > t)``."""
    if r == 0:
        return 1.0 if t < 0 else 0.0
    if t < 0:
        return 1.0
    return float(nbdtrc(t, r, 0.5))


def nb_tail_mean(t: int, r: int) -> float:
    """``E[X; X > t]``, using ``x P_r(X = x) = r P_{r+1}(X = x - 1)``."""
    if r == 0:
        return 0.0
    return r * nb_sf(t - 1, r + 1)


def nb_tail_pgf(t: int, r: int, s: float) -> float:
    """``E[s**X; X > t]``.

    Tilting by ``s**x`` turns the fair law into a negative binomial with head
    probability ``1 - s/2`` scaled by ``(2 - s)**-r``.
    """
    if r == 0:
        return 1.0 if t < 0 else 0.0
    scale = (2.0 - s) ** (-r)
    if t < 0:
        return scale
    return scale * float(nbdtrc(t, r, 1.0 - 0.5 * s))


class _NBTable:
    """Grow-on-demand table ``T[r, x] = P(X = x)`` for ``r`` heads.

    Filled with the Pascal recurrence ``T[r, x] = (T[r-1, x] + T[r, x-1]) / 2``,
    which only adds nonnegative numbers.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._table = np.ones((1, 1))

    def get(self, rmax: int, xmax: int) -> np.ndarray:
        table = self._table
        if table.shape[0] > rmax and table.shape[1] > xmax:
            return table
        with self._lock:
            table = self._table
            if table.shape[0] > rmax and table.shape[1] > xmax:
                return table
            nr, nx = table.shape
            if rmax >= nr:
                nr = max(rmax + 1, 2 * nr, 64)
            if xmax >= nx:
                nx = max(xmax + 1, 2 * nx, 256)
            new = np.zeros((nr, nx))
            new[0, 0] = 1.0
            for r in range(1, nr):
                new[r] = lfilter([0.5], [1.0, -0.5], new[r - 1])
            self._table = new
            return new


_NB_TABLE = _NBTable()


# ---------------------------------------------------------------------------
# Kernel


@dataclass
class _RowParts:
    # tails -> probability that the (i+1)-st head falls within the first M flips
    absorbed: dict[int, float]
    # heads h among the first M flips (h <= i) -> probability; M - h tails so far
    open: dict[int, float]


@dataclass
class TransitionKernel:
    """Lazily evaluated transition probabilities ``p(i, j)`` for one environment.

    Row decompositions are memoised behind a lock, so one kernel may be shared
    between threads.
    """

    env: CookieEnvironment
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, init=False, repr=False, compare=False
    )

    @property
    def M(self) -> int:
        return self.env.M

    def row_parts(self, i: int) -> _RowParts:
        try:
            return self._memo[i]
        except KeyError:
            pass
        parts = _row_parts(self.env.p, i)
        with self._lock:
            return self._memo.setdefault(i, parts)

    def prob(self, i: int, j: int) -> float:
        if i < 0 or j < 0:
            return 0.0
        parts = self.row_parts(i)
        total = parts.absorbed.get(j, 0.0)
        for h, w in parts.open.items():
            total += w * nb_pmf(j - (self.M - h), i + 1 - h)
        return total

    def row(self, i: int, n: int) -> np.ndarray:
        """``p(i, 0), ..., p(i, n-1)`` as an array."""
        out = np.zeros(n)
        parts = self.row_parts(i)
        for t, w in parts.absorbed.items():
            if t < n:
                out[t] += w
        table = _NB_TABLE.get(i + 1, n)
        for h, w in parts.open.items():
            off = self.M - h
            if off < n and w:
                out[off:] += w * table[i + 1 - h, : n - off]
        return out

    def matrix(self, n: int) -> np.ndarray:
        """Leading ``n x n`` block of the (infinite) transition matrix."""
        return np.stack([self.row(i, n) for i in range(n)]) if n else np.zeros((0, 0))

    def tail_mass(self, i: int, J: int) -> float:
        """``sum_{j > J} p(i, j)`` in closed form."""
        parts = self.row_parts(i)
        total = math.fsum(w for t, w in parts.absorbed.items() if t > J)
        for h, w in parts.open.items():
            total += w * nb_sf(J - (self.M - h), i + 1 - h)
        return total

    def tail_mean(self, i: int, J: int) -> float:
        """``sum_{j > J} j p(i, j)`` in closed form."""
        parts = self.row_parts(i)
        total = math.fsum(t * w for t, w in parts.absorbed.items() if t > J)
        for h, w in parts.open.items():
            off, r = self.M - h, i + 1 - h
            t = J - off
            total += w * (off * nb_sf(t, r) + nb_tail_mean(t, r))
        return total

    def tail_pgf(self, i: int, J: int, s: float) -> float:
        """``sum_{j > J} s**j p(i, j)`` in closed form."""
        parts = self.row_parts(i)
        total = math.fsum(s**t * w for t, w in parts.absorbed.items() if t > J)
        for h, w in parts.open.items():
            off, r = self.M - h, i + 1 - h
            total += w * s**off * nb_tail_pgf(J - off, r, s)
        return total

    def series_cutoff(self, i: int, tol: float = SERIES_TAIL_TOL) -> int:
        """A cut-off ``J`` with ``tail_mass(i, J) < tol``."""
        J = max(self.M, 2 * (i + 1) + 32)
        while self.tail_mass(i, J) >= tol:
            J *= 2
        return J

    def moments(self, k: int) -> tuple[float, float]:
        """Exact ``(E_k[Z_1], E_k[Z_1**2])`` from the row decomposition.

        The fair-coin part has mean ``r`` and variance ``2 r``.
        """
        parts = self.row_parts(k)
        m1 = math.fsum(t * w for t, w in parts.absorbed.items())
        m2 = math.fsum(t * t * w for t, w in parts.absorbed.items())
        for h, w in parts.open.items():
            off, r = self.M - h, k + 1 - h
            m1 += w * (off + r)
            m2 += w * (off * off + 2 * off * r + 2 * r + r * r)
        return m1, m2


def _row_parts(p: tuple[float, ...], i: int) -> _RowParts:
    alive = {0: 1.0}
    absorbed: dict[int, float] = defaultdict(float)
    for n, pn in enumerate(p, start=1):
        nxt: dict[int, float] = defaultdict(float)
        for h, w in alive.items():
            if h == i:
                absorbed[n - 1 - i] += w * pn
            else:
                nxt[h + 1] += w * pn
            nxt[h] += w * (1.0 - pn)
        alive = nxt
    return _RowParts(dict(absorbed), dict(alive))


def transition_prob(kernel: TransitionKernel, i: int, j: int) -> float:
    """``p(i, j)``: probability of exactly ``j`` tails before the ``(i+1)``-st head."""
    return kernel.prob(i, j)


def symmetric_closed_form(p: float, i: int, j: int) -> float:
    """Closed-form ``p(i, j)`` for three equal cookies of strength ``p``.

    Used as an independent check of :func:`transition_prob`.
    """
    q = 1.0 - p
    if i <= 2 and j <= 2:
        corner = (
            (p, p * q, p * q * q),
            (p * p, 2 * p * p * q, 1.5 * p * q * q),
            (p**3, 1.5 * p * p * q, 0.75 * (p * q * q + p * p * q)),
        )
        return corner[i][j]
    n = i + j - 3
    bracket = (
        binom(n, i - 3) * p**3
        + binom(n, j - 3) * q**3
        + 3 * binom(n, i - 2) * p * p * q
        + 3 * binom(n, j - 2) * p * q * q
    )
    return math.ldexp(bracket, -(i + j - 2))


def series_mean(kernel: TransitionKernel, k: int) -> float:
    """``sum_j j p(k, j)`` summed term by term, plus the closed-form tail."""
    J = kernel.series_cutoff(k)
    row = kernel.row(k, J + 1)
    return math.fsum(np.arange(J + 1) * row) + kernel.tail_mean(k, J)


def mean_next(kernel: TransitionKernel, k: int) -> float:
    """``E_k[Z_1]``; equals ``k + 1 - delta`` once ``k >= M - 1``."""
    if k >= kernel.M - 1:
        return k + 1 - kernel.env.delta
    return series_mean(kernel, k)


def pgf_next(kernel: TransitionKernel, k: int, s: float) -> float:
    """``E_k[s**Z_1]`` for ``0 <= s <= 1``."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s={s} outside [0, 1]")
    J = kernel.series_cutoff(k)
    row = kernel.row(k, J + 1)
    powers = s ** np.arange(J + 1, dtype=float)
    return math.fsum(powers * row) + kernel.tail_pgf(k, J, s)


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True)
class ChainPath:
    states: np.ndarray
    seed: int

    def __len__(self):
        return len(self.states)


@njit(cache=True)
def _chain_loop(p, z0, steps, seed):
    np.random.seed(seed)
    M = p.shape[0]
    out = np.empty(steps + 1, dtype=np.int64)
    out[0] = z0
    z = z0
    for n in range(1, steps + 1):
        need = z + 1
        heads = 0
        tails = 0
        for j in range(M):
            if np.random.random() < p[j]:
                heads += 1
                if heads == need:
                    break
            else:
                tails += 1
        while heads < need:
            if np.random.random() < 0.5:
                heads += 1
            else:
                tails += 1
        out[n] = tails
        z = tails
    return out


def simulate_chain(
    kernel: TransitionKernel, z0: int, steps: int, seed: int
) -> ChainPath:
    """Sample ``Z_1, ..., Z_steps`` by flipping the coins one at a time.

    ``Z_{n+1}`` is the number of tails before head number ``Z_n + 1``.  The
    returned path includes ``Z_0 = z0``.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if z0 < 0:
        raise ValueError("z0 must be nonnegative")
    p = np.asarray(kernel.env.p, dtype=np.float64)
    states = _chain_loop(p, int(z0), int(steps), int(seed) % (2**32))
    return ChainPath(states, int(seed))
