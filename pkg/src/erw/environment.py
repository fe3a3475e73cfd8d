"""Cookie environments: parameters, drift and the recurrence/speed classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .exceptions import DomainError


class Transience(str, enum.Enum):
    TRANSIENT_RIGHT = "TransientRight"
    TRANSIENT_LEFT = "TransientLeft"
    RECURRENT = "Recurrent"


class SpeedSign(str, enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    ZERO = "Zero"


@dataclass(frozen=True, init=False)
class CookieEnvironment:
    """A stack of ``M`` cookies placed identically on every site of the integers.

    Parameters
    ----------
    p : sequence of float
        Cookie strengths ``p_1, ..., p_M``; ``p_j`` is the probability of a
        right step on the ``j``-th visit to a site.  Values on the closed unit
        interval are accepted; :attr:`strict` reports whether all lie in the
        open interval.
    M : int, optional
        Number of cookies.  Inferred from ``p`` when omitted; checked otherwise.
    """

    p: tuple[float, ...]
    M: int = -1

    def __init__(self, p: Iterable[float], M: int | None = None):
        p = tuple(float(x) for x in p)
        if not p:
            raise DomainError("at least one cookie is required")
        if M is not None and M != len(p):
            raise DomainError(f"M={M} but {len(p)} cookie strengths given")
        for j, x in enumerate(p, start=1):
            if not (0.0 <= x <= 1.0):
                raise DomainError(f"cookie strength p_{j}={x!r} outside [0, 1]")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "M", len(p))

    @classmethod
    def from_string(cls, text: str) -> "CookieEnvironment":
        """Parse ``"0.9,0.9,0.9"``; M is the number of entries."""
        parts = [s.strip() for s in text.split(",")]
        if any(not s for s in parts):
            raise DomainError(f"malformed cookie list {text!r}")
        try:
            values = [float(s) for s in parts]
        except ValueError as exc:
            raise DomainError(f"malformed cookie list {text!r}") from exc
        return cls(values)

    @property
    def strict(self) -> bool:
        """True when every strength lies in the open interval (0, 1)."""
        return all(0.0 < x < 1.0 for x in self.p)

    @property
    def drifts(self) -> tuple[float, ...]:
        """Per-cookie drifts ``2 p_j - 1``."""
        return tuple(2.0 * x - 1.0 for x in self.p)

    @property
    def delta(self) -> float:
        return delta(self)

    def __str__(self) -> str:
        return ",".join(repr(x) for x in self.p)


@dataclass(frozen=True)
class Classification:
    transience: Transience
    speed_sign: SpeedSign


def delta(env: CookieEnvironment) -> float:
    """Total drift stored in one cookie stack, ``sum_j (2 p_j - 1)``."""
    return math.fsum(env.drifts)


def classify(env: CookieEnvironment) -> Classification:
    """Recurrence/transience and the sign of the limiting speed.

    Transience switches at ``|delta| > 1`` and ballisticity at ``|delta| > 2``;
    the boundary values belong to the recurrent / zero-speed branch.
    """
    d = delta(env)
    if d > 1:
        transience = Transience.TRANSIENT_RIGHT
    elif d < -1:
        transience = Transience.TRANSIENT_LEFT
    else:
        transience = Transience.RECURRENT
    if d > 2:
        sign = SpeedSign.POSITIVE
    elif d < -2:
        sign = SpeedSign.NEGATIVE
    else:
        sign = SpeedSign.ZERO
    return Classification(transience, sign)


def mirror(env: CookieEnvironment) -> CookieEnvironment:
    """Reflect the environment through the origin (``p_j -> 1 - p_j``)."""
    return CookieEnvironment([1.0 - x for x in env.p])


def as_environment(p: CookieEnvironment | Sequence[float] | str) -> CookieEnvironment:
    if isinstance(p, CookieEnvironment):
        return p
    if isinstance(p, str):
        return CookieEnvironment.from_string(p)
    return CookieEnvironment(p)
