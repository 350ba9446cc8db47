"""Points of the compactified state space N ∪ {∞, ∂} and the metric r.

Paths and vectorised code use integer state codes: ``k >= 0`` is a finite
state, ``CEMETERY_CODE`` (-1) is the cemetery and ``INFINITY_CODE`` (-2) is
the point at infinity (never held for positive time by a simulated path).
"""

from dataclasses import dataclass

import numpy as np

CEMETERY_CODE = -1
INFINITY_CODE = -2


@dataclass(frozen=True, order=False)
class StatePoint:
    """A point of N ∪ {∞, ∂}. ``k`` is only meaningful for finite points."""

    kind: str  # "finite" | "infinity" | "cemetery"
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("finite", "infinity", "cemetery"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        if self.kind == "finite" and self.k < 0:
            raise ValueError("finite states are nonnegative integers")

    @classmethod
    def finite(cls, k):
        return cls("finite", int(k))

    @property
    def code(self):
        if self.kind == "finite":
            return self.k
        return INFINITY_CODE if self.kind == "infinity" else CEMETERY_CODE

    @classmethod
    def from_code(cls, code):
        code = int(code)
        if code >= 0:
            return cls.finite(code)
        if code == CEMETERY_CODE:
            return CEMETERY
        if code == INFINITY_CODE:
            return INFINITY
        raise ValueError(f"invalid state code {code}")

    def __repr__(self):
        if self.kind == "finite":
            return f"StatePoint({self.k})"
        return "INFINITY" if self.kind == "infinity" else "CEMETERY"


INFINITY = StatePoint("infinity")
CEMETERY = StatePoint("cemetery")


def as_code(x):
    if isinstance(x, StatePoint):
        return x.code
    x = int(x)
    if x < INFINITY_CODE:
        raise ValueError(f"invalid state code {x}")
    return x


def embed(codes):
    """Embedding e(k)=1/(k+1), e(∞)=0, e(∂)=-1, vectorised over state codes."""
    codes = np.asarray(codes)
    out = np.where(codes >= 0, 1.0 / (np.maximum(codes, 0) + 1.0), 0.0)
    return np.where(codes == CEMETERY_CODE, -1.0, out)


def metric_r(x, y):
    """Distance r(x, y) = |e(x) - e(y)| between two points of N ∪ {∞, ∂}.

    >>> metric_r(0, 1)
    0.5
    >>> metric_r(StatePoint.finite(0), CEMETERY)
    2.0
    """
    return float(abs(embed(as_code(x)) - embed(as_code(y))))


def metric_r_codes(c1, c2):
    """Vectorised ``metric_r`` over arrays of state codes."""
    return np.abs(embed(c1) - embed(c2))
