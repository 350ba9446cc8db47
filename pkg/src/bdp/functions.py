"""Bounded functions on N ∪ {∞, ∂} used as resolvent payloads and test functions."""

import math

import numpy as np

from .states import CEMETERY_CODE, INFINITY_CODE, StatePoint, as_code

__all__ = ["StateFunction"]


class StateFunction:
    """A bounded function on the compactified state space.

    Values on N come from ``fn(k_array)``; ``at_inf`` and ``at_cem`` are the
    values at infinity and at the cemetery.  ``sup`` is a bound on
    ``|f|`` over all of N (exact for the provided constructors).
    ``tail_from``, when set, means ``f(k) = at_inf`` for every ``k >= tail_from``.
    """

    def __init__(self, fn, at_inf, at_cem=0.0, sup=None, tail_from=None, name=""):
        self._fn = fn
        self.at_inf = float(at_inf)
        self.at_cem = float(at_cem)
        self.tail_from = tail_from
        self.name = name
        if sup is None:
            if tail_from is None:
                raise ValueError("sup bound required for functions without a constant tail")
            sup = max(float(np.max(np.abs(fn(np.arange(tail_from + 1))), initial=0.0)), abs(self.at_inf))
        self.sup = float(sup)

    def values(self, k):
        k = np.asarray(k)
        out = np.asarray(self._fn(np.maximum(k, 0)), dtype=float) * np.ones(k.shape)
        if self.tail_from is not None:
            out = np.where(k >= self.tail_from, self.at_inf, out)
        return out

    def __call__(self, x):
        """Evaluate at a state code array or a single StatePoint/code."""
        if isinstance(x, StatePoint) or np.isscalar(x):
            c = as_code(x)
            if c == CEMETERY_CODE:
                return self.at_cem
            if c == INFINITY_CODE:
                return self.at_inf
            return float(self.values(c))
        codes = np.asarray(x)
        out = self.values(np.maximum(codes, 0))
        out = np.where(codes == CEMETERY_CODE, self.at_cem, out)
        return np.where(codes == INFINITY_CODE, self.at_inf, out)

    @property
    def nonneg(self):
        return self.tail_from is not None and bool(np.all(self.values(np.arange(self.tail_from + 1)) >= 0)) and self.at_inf >= 0

    # -- constructors --------------------------------------------------------
    @classmethod
    def indicator(cls, states, include_inf=False, include_cem=False):
        """Indicator of a finite set of finite states (optionally with ∞, ∂)."""
        s = sorted({int(k) for k in states})
        top = (s[-1] + 1) if s else 0
        arr = np.zeros(top)
        arr[s] = 1.0
        return cls.from_array(arr, tail=1.0 if include_inf else 0.0,
                              at_cem=1.0 if include_cem else 0.0,
                              name=f"1{{{','.join(map(str, s))}}}")

    @classmethod
    def constant(cls, c, at_cem=None):
        c = float(c)
        return cls(lambda k: np.full(np.shape(k), c), c, c if at_cem is None else at_cem,
                   sup=abs(c), tail_from=0, name=f"const({c:g})")

    @classmethod
    def from_array(cls, arr, tail=0.0, at_cem=0.0, name="array"):
        """``f(k) = arr[k]`` for ``k < len(arr)``, ``tail`` afterwards and at ∞."""
        arr = np.asarray(arr, dtype=float)
        n = arr.size
        tail = float(tail)

        def fn(k):
            k = np.asarray(k)
            return np.where(k < n, arr[np.clip(k, 0, max(n - 1, 0))] if n else tail, tail)

        sup = max(float(np.max(np.abs(arr), initial=0.0)), abs(tail))
        return cls(fn, tail, at_cem, sup=sup, tail_from=n, name=name)

    @classmethod
    def from_callable(cls, fn, at_inf, sup, at_cem=0.0, name="callable"):
        return cls(fn, at_inf, at_cem, sup=sup, name=name)

    def split(self):
        """Positive and negative parts on N (as functions vanishing at ∂)."""
        pos = StateFunction(lambda k: np.maximum(self.values(k), 0.0), max(self.at_inf, 0.0),
                            0.0, sup=self.sup, tail_from=self.tail_from)
        neg = StateFunction(lambda k: np.maximum(-self.values(k), 0.0), max(-self.at_inf, 0.0),
                            0.0, sup=self.sup, tail_from=self.tail_from)
        return pos, neg

    def shifted_to_zero_at_cem(self):
        """``f - f(∂)``, the part that vanishes at the cemetery."""
        c = self.at_cem
        if c == 0:
            return self
        return StateFunction(lambda k: self.values(k) - c, self.at_inf - c, 0.0,
                             sup=self.sup + abs(c), tail_from=self.tail_from, name=self.name)

    def __repr__(self):
        return f"StateFunction({self.name or 'f'}, inf={self.at_inf:g}, cem={self.at_cem:g})"

    @property
    def is_finite_sup(self):
        return math.isfinite(self.sup)
