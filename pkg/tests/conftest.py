import itertools
from fractions import Fraction

import numpy as np
import pytest

from erw import CookieEnvironment

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def enumerate_transition(p, i, j):
    """p(i, j) by summing over every coin sequence, in exact rationals.

    The (i+1)-st head lands on flip i+j+1, so the first i+j flips hold exactly
    i heads.
    """
    p = [Fraction(x) for x in p]
    n = i + j + 1

    def head(k):  # k is 1-based
        return p[k - 1] if k <= len(p) else Fraction(1, 2)

    total = Fraction(0)
    for heads in itertools.combinations(range(1, n), i):
        hs = set(heads)
        w = head(n)
        for k in range(1, n):
            w *= head(k) if k in hs else 1 - head(k)
        total += w
    return total


def ballistic_grid(n=10, lo=0.55, hi=1.0):
    """Points of an n x n x n grid on [lo, hi]^3 with delta > 2."""
    vals = np.round(np.linspace(lo, hi, n), 12)
    pts = []
    for p in itertools.product(vals, repeat=3):
        if 2 * sum(p) - 3 > 2:
            pts.append(tuple(float(x) for x in p))
    return pts


@pytest.fixture
def env09():
    return CookieEnvironment((0.9, 0.9, 0.9))


@pytest.fixture
def env987():
    return CookieEnvironment((0.9, 0.8, 0.7))
