"""Closed-form speed bounds for three cookies per site.

For ``M = 3`` and ``delta > 2`` the speed is ``V = f1 / (f2 + f3 pi(0))`` where
``pi(0)`` is the stationary mass of state 0 of the backward branching process.
Since ``f1 > 0`` and ``f3 < 0`` on that region, ``x -> f1 / (f2 + f3 x)`` is
increasing on ``[0, 1]``, so a bracket on ``pi(0)`` maps to a bracket on ``V``.

Every formula here is written against broadcasting numpy arrays so that grid
scans evaluate in one pass; the scalar API wraps the same code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .environment import CookieEnvironment, as_environment
from .exceptions import DomainError, EmptyRegion

REGION_EPS = 1e-9
CRITICAL_P = 5.0 / 6.0


@dataclass(frozen=True)
class AbcCoefficients:
    """Coefficients of the linear relation ``a pi(0) + b pi(1) = c``."""

    a: float
    b: float
    c: float


@dataclass(frozen=True)
class SpeedBounds:
    f1: float
    f2: float
    f3: float
    pi0_lower: float
    pi0_upper: float
    v_lower: float
    v_upper: float

    @property
    def gap(self) -> float:
        return self.v_upper - self.v_lower

    def as_dict(self) -> dict:
        return {
            "f1": self.f1,
            "f2": self.f2,
            "f3": self.f3,
            "pi0_lower": self.pi0_lower,
            "pi0_upper": self.pi0_upper,
            "v_lower": self.v_lower,
            "v_upper": self.v_upper,
        }


@dataclass(frozen=True)
class GapSearchResult:
    argmax: tuple[float, ...]
    max_gap: float
    evaluations: int
    grid_resolution: float
    region: str
    # coarse grid, kept for plotting: one row per admissible grid point
    grid_points: np.ndarray = field(repr=False, compare=False, default=None)
    grid_lower: np.ndarray = field(repr=False, compare=False, default=None)
    grid_upper: np.ndarray = field(repr=False, compare=False, default=None)

    def as_dict(self) -> dict:
        return {
            "region": self.region,
            "argmax": list(self.argmax),
            "max_gap": self.max_gap,
            "evaluations": self.evaluations,
            "grid_resolution": self.grid_resolution,
        }


# ---------------------------------------------------------------------------
# Vectorised formulas


def _abc(p1, p2, p3):
    d1, d2, d3 = 2 * p1 - 1, 2 * p2 - 1, 2 * p3 - 1
    a = p1 * (d2 + d3) + p2 * d3 * (1 - p1)
    b = d3 * p1 * p2
    c = d1 + d2 + d3 - 1
    return a, b, c


def _f(p1, p2, p3):
    f1 = 2 * p1 + 2 * p2 + 2 * p3 - 5
    f2 = 9 + 8 * (p1 * p2 + p1 * p3 + p2 * p3) - 10 * (p1 + p2 + p3)
    f3 = 2 * (2 * p3 - 1) * (p1 + p2 - 3 * p1 * p2)
    return f1, f2, f3


def _pi0_bracket(p1, p2, p3):
    a, b, c = _abc(p1, p2, p3)
    p00 = p1
    p10 = p1 * p2
    p01 = (1 - p1) * p2
    p11 = (1 - p1) * p2 * p3 + p1 * (1 - p2) * p3
    lower = c * p10 / (b * (1 - p00) + a * p10)
    upper = c / (b * p01 / (1 - p11) + a)
    return lower, upper


def bound_arrays(p1, p2, p3):
    """``(f1, f2, f3, pi0_lower, pi0_upper, v_lower, v_upper)`` elementwise."""
    f1, f2, f3 = _f(p1, p2, p3)
    lo, hi = _pi0_bracket(p1, p2, p3)
    return f1, f2, f3, lo, hi, f1 / (f2 + f3 * lo), f1 / (f2 + f3 * hi)


def gap_array(p1, p2, p3):
    with np.errstate(divide="ignore", invalid="ignore"):
        *_, vlo, vhi = bound_arrays(p1, p2, p3)
    return vhi - vlo


# ---------------------------------------------------------------------------
# Scalar API


def _three(env) -> tuple[float, float, float]:
    env = as_environment(env)
    if env.M != 3:
        raise DomainError(f"closed-form bounds need M=3 cookies, got M={env.M}")
    return env.p


def _require_ballistic(env: CookieEnvironment):
    d = env.delta
    if not d > 2:
        raise DomainError(
            f"delta={d:.17g} <= 2: the speed is zero and no bracket applies"
        )


def abc_coefficients(env: CookieEnvironment) -> AbcCoefficients:
    a, b, c = _abc(*_three(env))
    return AbcCoefficients(float(a), float(b), float(c))


def f_coefficients(env: CookieEnvironment) -> tuple[float, float, float]:
    """``(f1, f2, f3)`` of the representation ``V = f1 / (f2 + f3 pi(0))``."""
    return tuple(float(x) for x in _f(*_three(env)))


def pi0_bracket(env: CookieEnvironment) -> tuple[float, float]:
    """Lower and upper bounds on the stationary mass ``pi(0)``.

    Both follow from ``pi(i) >= pi(0) p(0, i) + pi(1) p(1, i)`` at ``i = 0, 1``
    combined with the ``a, b, c`` relation.  The upper bound uses
    ``p(0, 1) = (1 - p1) p2``.
    """
    p = _three(env)
    _require_ballistic(as_environment(env))
    lo, hi = _pi0_bracket(*p)
    return float(lo), float(hi)


def speed_interval(env: CookieEnvironment) -> SpeedBounds:
    """Closed-form bracket ``[v_lower, v_upper]`` on the limiting speed."""
    p = _three(env)
    _require_ballistic(as_environment(env))
    return SpeedBounds(*(float(x) for x in bound_arrays(*p)))


def symmetric_interval(p: float) -> tuple[float, float]:
    """Speed bracket for three equal cookies, as explicit rational functions of ``p``."""
    if not (CRITICAL_P < p <= 1.0):
        raise DomainError(f"p={p!r} must lie in (5/6, 1]")
    lower = (6 * p - 5) * (p**2 - 2 * p - 1) / (
        24 * p**4 - 42 * p**3 - 3 * p**2 + 28 * p - 9
    )
    upper = (6 * p - 5) * (2 * p**4 - 7 * p**3 + 5 * p**2 + p - 3) / (
        48 * p**6 - 156 * p**5 + 180 * p**4 - 61 * p**3 - 53 * p**2 + 51 * p - 11
    )
    return lower, upper


# ---------------------------------------------------------------------------
# Gap maximisation


def _lexmax(values: np.ndarray, points: np.ndarray) -> int:
    """Index of the largest value; ties go to the lexicographically smallest point."""
    best = np.nanmax(values)
    idx = np.flatnonzero(values == best)
    if len(idx) == 1:
        return int(idx[0])
    order = np.lexsort(points[idx].T[::-1])
    return int(idx[order[0]])


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(np.floor((hi - lo) / step + 1e-9))
    ax = lo + step * np.arange(n + 1)
    if hi - ax[-1] > 1e-12:
        ax = np.append(ax, hi)
    return ax


def maximize_gap(
    region: str = "symmetric",
    grid_step: float = 1e-3,
    refine_tol: float = 1e-7,
    limits: Sequence[tuple[float, float]] | None = None,
    eps: float = REGION_EPS,
    max_evaluations: int = 1_000_000,
) -> GapSearchResult:
    """Maximise ``v_upper - v_lower`` over ``{delta >= 2 + eps}``.

    A grid scan with spacing ``grid_step`` is followed by a compass search
    (coordinate steps, halved on failure) from the best grid point until the
    step drops below ``refine_tol``.

    Parameters
    ----------
    region : {"symmetric", "general"}
        ``symmetric`` searches ``p1 = p2 = p3 = p``; ``general`` the unit cube.
    limits : sequence of (lo, hi), optional
        Box restricting the search: one pair for ``symmetric``, three for
        ``general``.  Defaults to ``[0, 1]`` per coordinate.
    """
    if grid_step <= 0 or refine_tol <= 0:
        raise ValueError("grid_step and refine_tol must be positive")
    if region == "symmetric":
        dim = 1
    elif region == "general":
        dim = 3
    else:
        raise ValueError(f"unknown region {region!r}")
    limits = [(0.0, 1.0)] * dim if limits is None else [tuple(map(float, b)) for b in limits]
    if len(limits) != dim:
        raise ValueError(f"{region} region needs {dim} limit pair(s)")

    def expand(x):
        x = np.atleast_2d(x)
        return (x[:, 0],) * 3 if dim == 1 else (x[:, 0], x[:, 1], x[:, 2])

    def admissible(x):
        p1, p2, p3 = expand(x)
        return (2 * (p1 + p2 + p3) - 3) >= 2 + eps

    if dim == 1:
        lo, hi = limits[0]
        lo = max(lo, (5 + eps) / 6)
        if lo > hi:
            raise EmptyRegion(f"no point with delta >= 2+{eps} in [{limits[0][0]}, {hi}]")
        points = _axis(lo, hi, grid_step)[:, None]
    else:
        axes = [_axis(a, b, grid_step) for a, b in limits]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)
    points = points[admissible(points)]
    if len(points) == 0:
        raise EmptyRegion(f"no grid point with delta >= 2+{eps} inside {limits}")

    with np.errstate(divide="ignore", invalid="ignore"):
        *_, vlo, vhi = bound_arrays(*expand(points))
    gaps = vhi - vlo
    evaluations = len(points)
    i = _lexmax(gaps, points)
    x, fx = points[i].copy(), float(gaps[i])

    lows = np.array([b[0] for b in limits])
    highs = np.array([b[1] for b in limits])
    step = grid_step / 2
    while step >= refine_tol and evaluations < max_evaluations:
        cands = []
        for axis in range(dim):
            for sign in (-1.0, 1.0):
                y = x.copy()
                y[axis] = min(max(y[axis] + sign * step, lows[axis]), highs[axis])
                if y[axis] != x[axis] and admissible(y)[0]:
                    cands.append(y)
        if cands:
            cands = np.array(cands)
            g = gap_array(*expand(cands))
            evaluations += len(cands)
            j = _lexmax(g, cands)
            if g[j] > fx:
                x, fx = cands[j], float(g[j])
                continue
        step /= 2

    argmax = (float(x[0]),) if dim == 1 else tuple(float(v) for v in x)
    return GapSearchResult(
        argmax=argmax,
        max_gap=fx,
        evaluations=evaluations,
        grid_resolution=grid_step,
        region=region,
        grid_points=points,
        grid_lower=vlo,
        grid_upper=vhi,
    )
