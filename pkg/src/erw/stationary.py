"""Truncated stationary distribution of the backward branching process.

Only states ``0..N-1`` are kept.  Two ways of folding the discarded mass of
each row back into the block are offered:

``"mean_preserving"`` (default)
    The row's tail mass is moved to state ``N - 1`` and the row is then mixed
    with the point mass at ``N - 1`` just enough to restore the exact
    conditional mean ``E_i[Z_1]``.  The truncated chain then keeps the linear
    drift ``k + 1 - delta`` of every row, so the first-moment balance that ties
    ``pi(0..M-2)`` together holds exactly and those entries barely move with
    ``N``.
``"renormalize"``
    Each row of the leading block is divided by its sum.  Rows near the cut
    lose drift, and ``pi_hat(0..M-2)`` converge only like ``N**(1 - delta)``.

The block's stationary vector is computed with the Grassmann-Taksar-Heyman
elimination, which involves no subtractions and keeps tiny probabilities
accurate.  A few power iterations then confirm the fixed point to the
requested tolerance.

The stationary law has a power-law tail ``pi(k) ~ k**-delta``, so the plain
truncated mean ``sum_k k pi_hat(k)`` is biased by ``O(N**(2 - delta))``.  For
``delta > 2`` the mean is instead recovered from the second-moment balance of
the chain, which needs only ``pi_hat(0..M-2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .branching import TransitionKernel, mean_next
from .environment import CookieEnvironment
from .exceptions import DomainError, NonConvergence

DEFAULT_TRUNCATION = 200
DEFAULT_TOL = 1e-12
MAX_POWER_ITERATIONS = 10_000
SCHEMES = ("mean_preserving", "renormalize")


@dataclass(frozen=True)
class StationarySolution:
    """Truncated stationary vector with its diagnostics.

    Attributes
    ----------
    truncation : int
        Number of retained states ``N``.
    scheme : str
        How discarded row mass was folded back; see the module notes.
    pi_hat : ndarray
        Stationary vector of the truncated ``N x N`` chain.
    tail_mass_bound : float
        Mass leaking out of the block per step under ``pi_hat``:
        ``sum_i pi_hat(i) * sum_{j >= N} p(i, j)``.
    mean_estimate : float
        Estimate of ``E_pi[Z_0]``.
    truncated_mean : float
        ``sum_k k pi_hat(k)``, reported whatever ``mean_method`` is.
    mean_method : str
        ``"moment_balance"`` or ``"truncated"``.
    genabc_residual : float
        Residual of the linear identity satisfied by ``pi(0..M-2)``.
    speed_estimate : float
        ``1 / (1 + 2 mean_estimate)``.
    fixed_point_error : float
        Total variation distance between ``pi_hat`` and ``pi_hat P_hat``.
    """

    truncation: int
    scheme: str
    pi_hat: np.ndarray
    tail_mass_bound: float
    mean_estimate: float
    truncated_mean: float
    mean_method: str
    genabc_residual: float
    speed_estimate: float
    fixed_point_error: float
    iterations: int

    def summary(self) -> dict:
        return {
            "truncation": self.truncation,
            "scheme": self.scheme,
            "tail_mass_bound": self.tail_mass_bound,
            "mean_estimate": self.mean_estimate,
            "speed_estimate": self.speed_estimate,
            "genabc_residual": self.genabc_residual,
            "truncated_mean": self.truncated_mean,
            "mean_method": self.mean_method,
        }


def gth_stationary(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible-enough stochastic matrix by GTH."""
    A = np.array(P, dtype=float, copy=True)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if not s > 0:
            return _nullspace_stationary(P)
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def _nullspace_stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(A, rhs, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _tv(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * float(np.abs(a - b).sum())


def moment_balance_mean(kernel: TransitionKernel, pi_head) -> float:
    """``E_pi[Z_0]`` from ``pi(0), ..., pi(M-2)`` when ``delta > 2``.

    For ``k >= M - 1`` the increment ``E_k[Z_1**2] - k**2`` equals
    ``2 k (2 - delta) + C`` with ``C`` independent of ``k``.  Stationarity of
    the second moment then determines the mean from the first ``M - 1``
    stationary probabilities.
    """
    env = kernel.env
    M, d = env.M, env.delta
    if not d > 2:
        raise DomainError(f"moment balance needs delta > 2, got delta={d}")
    k0 = M - 1
    const = kernel.moments(k0)[1] - k0 * k0 - 2 * k0 * (2 - d)
    s0 = math.fsum(pi_head[:k0])
    s1 = math.fsum(k * pi_head[k] for k in range(k0))
    excess = math.fsum(
        pi_head[k] * (kernel.moments(k)[1] - k * k) for k in range(k0)
    )
    return s1 + (const * (1.0 - s0) + excess) / (2.0 * (d - 2.0))


def genabc_residual(env: CookieEnvironment, pi_hat, kernel=None) -> float:
    d = env.delta
    if not d > 1:
        raise DomainError(f"identity requires delta > 1, got delta={d}")
    kernel = kernel if kernel is not None else TransitionKernel(env)
    lhs = math.fsum(
        pi_hat[k] * (mean_next(kernel, k) - k - 1 + d) for k in range(env.M - 1)
    )
    return abs(lhs - (d - 1))


def truncated_matrix(kernel: TransitionKernel, N: int, scheme: str = "mean_preserving"):
    """Stochastic ``N x N`` approximation of the kernel and the per-row tail mass."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown truncation scheme {scheme!r}")
    P = kernel.matrix(N)
    last = N - 1
    leak = np.array([kernel.tail_mass(i, last) for i in range(N)])
    if scheme == "renormalize":
        P /= P.sum(axis=1, keepdims=True)
        return P, leak
    states = np.arange(N)
    for i in range(N):
        deficit = kernel.tail_mean(i, last) - last * leak[i]
        P[i, last] += leak[i]
        P[i] /= P[i].sum()  # absorbs rounding in the block sum
        room = last - states @ P[i]
        lam = deficit / room if room > 0 else np.inf
        if not 0.0 <= lam <= 1.0:
            raise DomainError(
                f"row {i} cannot keep its mean inside {N} states; increase the truncation"
            )
        P[i] *= 1.0 - lam
        P[i, last] += lam
    return P, leak


def solve_stationary(
    kernel: TransitionKernel,
    N: int = DEFAULT_TRUNCATION,
    tol: float = DEFAULT_TOL,
    mean_method: str = "auto",
    max_iter: int = MAX_POWER_ITERATIONS,
    scheme: str = "mean_preserving",
) -> StationarySolution:
    """Stationary distribution of the chain truncated to states ``0..N-1``.

    Parameters
    ----------
    kernel : TransitionKernel
    N : int
        Truncation level, at least ``M + 2``.
    tol : float
        Target total-variation distance between ``pi_hat`` and ``pi_hat P_hat``.
    mean_method : {"auto", "moment_balance", "truncated"}
        ``"auto"`` uses the moment balance when ``delta > 2`` and the truncated
        sum otherwise (for ``delta <= 2`` the true mean is infinite and the
        truncated value grows with ``N``).

    Raises
    ------
    DomainError
        If ``delta <= 1`` (no stationary distribution) or ``N`` is too small.
    NonConvergence
        If the fixed point is not reached within ``max_iter`` power steps.
    """
    env = kernel.env
    d = env.delta
    if not d > 1:
        raise DomainError(
            f"no stationary distribution: delta={d} <= 1 (walk not transient to the right)"
        )
    if N < env.M + 2:
        raise DomainError(f"truncation N={N} must be at least M+2={env.M + 2}")
    if mean_method not in ("auto", "moment_balance", "truncated"):
        raise ValueError(f"unknown mean_method {mean_method!r}")

    P, leak = truncated_matrix(kernel, N, scheme)

    pi = gth_stationary(P)
    err = _tv(pi @ P, pi)
    iterations = 0
    while err >= tol:
        if iterations >= max_iter:
            raise NonConvergence(
                f"power iteration stalled at TV change {err:.3e} after {iterations} steps"
            )
        nxt = pi @ P
        nxt /= nxt.sum()
        err = _tv(nxt, pi)
        pi = nxt
        iterations += 1

    truncated_mean = float(np.arange(N) @ pi)
    if mean_method == "auto":
        mean_method = "moment_balance" if d > 2 else "truncated"
    if mean_method == "moment_balance":
        mean = moment_balance_mean(kernel, pi)
    else:
        mean = truncated_mean

    return StationarySolution(
        truncation=N,
        scheme=scheme,
        pi_hat=pi,
        tail_mass_bound=float(leak @ pi),
        mean_estimate=mean,
        truncated_mean=truncated_mean,
        mean_method=mean_method,
        genabc_residual=genabc_residual(env, pi, kernel),
        speed_estimate=1.0 / (1.0 + 2.0 * mean),
        fixed_point_error=err,
        iterations=iterations,
    )


def check_genabc(env: CookieEnvironment, sol: StationarySolution) -> float:
    """``|sum_{k<=M-2} pi_hat(k) (E_k[Z_1] - k - 1 + delta) - (delta - 1)|``."""
    return genabc_residual(env, sol.pi_hat)


def check_abc(env: CookieEnvironment, sol: StationarySolution) -> float:
    """``|a pi_hat(0) + b pi_hat(1) - c|`` for three cookies."""
    from .bounds import abc_coefficients

    if not env.delta > 1:
        raise DomainError(f"identity requires delta > 1, got delta={env.delta}")
    co = abc_coefficients(env)
    return abs(co.a * sol.pi_hat[0] + co.b * sol.pi_hat[1] - co.c)
