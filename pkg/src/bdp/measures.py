"""Jumping measures on the nonnegative integers.

Every measure exposes point weights, total and tail mass, and ``geo_tail``,
an upper bound on ``sum_{j>=0} nu_{K+j} r**j j**deg``.  The last one is what
turns a geometric majorant of a sequence into a certified bound on the tail
of its nu-series.  Infinite total mass is only possible through the
analytic families.
"""

import math

import numpy as np
from scipy.special import zeta

from .errors import MalformedDescriptor

__all__ = [
    "Measure",
    "FiniteTable",
    "Geometric",
    "PowerTail",
    "TableWithTail",
    "Restricted",
    "Scaled",
    "zero_measure",
    "build_measure",
]


def _geo_moment(x, deg):
    """sum_{j>=0} x**j j**deg for deg in {0, 1}."""
    if x >= 1:
        return math.inf
    if deg == 0:
        return 1.0 / (1.0 - x)
    if deg == 1:
        return x / (1.0 - x) ** 2
    raise ValueError("deg must be 0 or 1")


class Measure:
    """Base class.  Subclasses set ``support_max`` (None if unbounded)."""

    support_max = None

    def weights(self, k):
        raise NotImplementedError

    def __call__(self, k):
        return self.weights(k)

    @property
    def total_mass(self):
        return self.tail_mass(0)

    def tail_mass(self, K):
        raise NotImplementedError

    def partial_sum(self, K):
        """``sum_{k<=K} nu_k``."""
        if K < 0:
            return 0.0
        return float(np.sum(self.weights(np.arange(K + 1))))

    def geo_tail(self, K, ratio, deg=0):
        raise NotImplementedError

    def series_bound(self, K, majorant):
        """Bound on ``sum_{k>=K} nu_k g_k`` given ``g_{K+j} <= sum c r**j j**d``."""
        total = 0.0
        for coef, ratio, deg in majorant:
            if coef == 0:
                continue
            total += coef * self.geo_tail(K, ratio, deg)
        return total

    def is_zero(self):
        return self.total_mass == 0

    def quantile(self, u):
        """Smallest ``k`` with ``sum_{i<=k} nu_i >= u * |nu|`` for finite mass."""
        total = self.total_mass
        if not (math.isfinite(total) and total > 0):
            raise ValueError("quantile needs finite positive mass")
        target = (1.0 - u) * total
        # find k with tail_mass(k+1) <= target
        lo, hi = 0, 1
        while self.tail_mass(hi) > target:
            lo, hi = hi, hi * 2
            if hi > 2**62:
                raise RuntimeError("quantile search did not terminate")
        # tail_mass(hi) <= target; smallest k+1 in (lo, hi]
        lo = max(lo, 0)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_mass(mid) > target:
                lo = mid
            else:
                hi = mid
        k1 = hi if self.tail_mass(lo) > target else lo
        return max(k1 - 1, 0)

    def cdf_table(self, kmax):
        return np.cumsum(self.weights(np.arange(kmax + 1)))


class FiniteTable(Measure):
    """Finitely supported measure from ``{k: weight}`` or pairs."""

    def __init__(self, entries=()):
        d = dict(entries.items() if isinstance(entries, dict) else entries)
        for k, v in d.items():
            if int(k) < 0 or not v >= 0 or not math.isfinite(v):
                raise MalformedDescriptor(f"bad table entry ({k}, {v})")
        n = max((int(k) for k in d), default=-1) + 1
        self._w = np.zeros(n)
        for k, v in d.items():
            self._w[int(k)] += float(v)
        nz = np.flatnonzero(self._w)
        self.support_max = int(nz[-1]) if nz.size else -1
        self._w = self._w[: self.support_max + 1]
        self._cum = np.concatenate([[0.0], np.cumsum(self._w)])

    @classmethod
    def from_array(cls, w):
        return cls({k: v for k, v in enumerate(np.asarray(w, dtype=float)) if v != 0})

    def weights(self, k):
        k = np.asarray(k)
        n = self._w.size
        if n == 0:
            return np.zeros(k.shape)
        return np.where((k >= 0) & (k < n), self._w[np.clip(k, 0, n - 1)], 0.0)

    def tail_mass(self, K):
        K = min(max(int(K), 0), self._w.size)
        return float(self._cum[-1] - self._cum[K]) if K < self._w.size else 0.0

    def partial_sum(self, K):
        K = min(int(K), self._w.size - 1)
        return float(self._cum[K + 1]) if K >= 0 else 0.0

    def geo_tail(self, K, ratio, deg=0):
        K = max(int(K), 0)
        if K >= self._w.size:
            return 0.0
        j = np.arange(self._w.size - K, dtype=float)
        return float(np.sum(self._w[K:] * ratio**j * j**deg))

    def array(self):
        return self._w.copy()

    @property
    def descriptor(self):
        return {"family": "table", "entries": {int(k): float(v) for k, v in enumerate(self._w) if v}}

    def __repr__(self):
        return f"FiniteTable({dict((k, float(v)) for k, v in enumerate(self._w) if v)})"


def zero_measure():
    return FiniteTable({})


class Geometric(Measure):
    """``nu_k = C * rho**k`` with ``0 <= rho < 1``."""

    def __init__(self, C, rho):
        C, rho = float(C), float(rho)
        if not C >= 0:
            raise MalformedDescriptor(f"geometric measure needs C >= 0, got {C}")
        if not 0 <= rho < 1:
            raise MalformedDescriptor(f"geometric measure needs 0 <= rho < 1, got {rho}")
        self.C, self.rho = C, rho

    def weights(self, k):
        k = np.asarray(k)
        with np.errstate(under="ignore"):
            return np.where(k >= 0, self.C * np.power(self.rho, np.maximum(k, 0).astype(float)), 0.0)

    def tail_mass(self, K):
        return self.C * self.rho ** max(int(K), 0) / (1 - self.rho)

    def geo_tail(self, K, ratio, deg=0):
        if self.C == 0:
            return 0.0
        return self.C * self.rho ** max(int(K), 0) * _geo_moment(self.rho * ratio, deg)

    @property
    def descriptor(self):
        return {"family": "geometric", "C": self.C, "rho": self.rho}

    def __repr__(self):
        return f"Geometric(C={self.C}, rho={self.rho})"


class PowerTail(Measure):
    """``nu_k = C * (k+1)**(-p)``; total mass infinite when ``p <= 1``."""

    def __init__(self, C, p):
        C, p = float(C), float(p)
        if not C >= 0 or not p > 0:
            raise MalformedDescriptor(f"power-tail measure needs C >= 0 and p > 0, got C={C}, p={p}")
        self.C, self.p = C, p

    def weights(self, k):
        k = np.asarray(k)
        return np.where(k >= 0, self.C * np.power(np.maximum(k, 0) + 1.0, -self.p), 0.0)

    def tail_mass(self, K):
        if self.C == 0:
            return 0.0
        if self.p <= 1:
            return math.inf
        return self.C * float(zeta(self.p, max(int(K), 0) + 1))

    def geo_tail(self, K, ratio, deg=0):
        if self.C == 0:
            return 0.0
        if ratio >= 1:
            return self.tail_mass(K) if (ratio == 1 and deg == 0) else math.inf
        # weights are nonincreasing, so nu_{K+j} <= nu_K
        return float(self.weights(max(int(K), 0))) * _geo_moment(ratio, deg)

    @property
    def descriptor(self):
        return {"family": "power", "C": self.C, "p": self.p}

    def __repr__(self):
        return f"PowerTail(C={self.C}, p={self.p})"


class TableWithTail(Measure):
    """Explicit weights on ``0..L-1`` followed by ``tail`` evaluated at ``k >= L``."""

    def __init__(self, prefix, tail):
        self.prefix = np.asarray(prefix, dtype=float)
        if np.any(self.prefix < 0) or not np.all(np.isfinite(self.prefix)):
            raise MalformedDescriptor("table prefix must be finite and nonnegative")
        self.tail = tail
        self.L = self.prefix.size

    def weights(self, k):
        k = np.asarray(k)
        L = self.L
        head = self.prefix[np.clip(k, 0, L - 1)] if L else np.zeros(k.shape)
        return np.where(k < 0, 0.0, np.where(k < L, head, self.tail.weights(k)))

    def tail_mass(self, K):
        K = max(int(K), 0)
        head = float(np.sum(self.prefix[K:])) if K < self.L else 0.0
        return head + self.tail.tail_mass(max(K, self.L))

    def geo_tail(self, K, ratio, deg=0):
        K = max(int(K), 0)
        if K >= self.L:
            return self.tail.geo_tail(K, ratio, deg)
        j = np.arange(self.L - K, dtype=float)
        head = float(np.sum(self.prefix[K:] * ratio**j * j**deg))
        s = self.L - K
        t0 = self.tail.geo_tail(self.L, ratio, 0)
        rest = t0 if deg == 0 else self.tail.geo_tail(self.L, ratio, 1) + s * t0
        return head + (ratio**s * rest if rest else 0.0)

    @property
    def descriptor(self):
        return {"family": "table_tail", "prefix": self.prefix.tolist(), "tail": self.tail.descriptor}

    def __repr__(self):
        return f"TableWithTail({self.prefix.tolist()}, {self.tail!r})"


class Restricted(Measure):
    """``base`` restricted to ``lo <= k <= hi`` (``hi=None``: unbounded)."""

    def __init__(self, base, lo=0, hi=None):
        self.base, self.lo, self.hi = base, max(int(lo), 0), hi
        bmax = base.support_max
        if hi is not None:
            self.support_max = int(hi) if bmax is None else min(int(hi), bmax)
        else:
            self.support_max = bmax

    def weights(self, k):
        k = np.asarray(k)
        mask = k >= self.lo
        if self.hi is not None:
            mask &= k <= self.hi
        return np.where(mask, self.base.weights(k), 0.0)

    def tail_mass(self, K):
        K = max(int(K), self.lo)
        if self.hi is not None:
            if K > self.hi:
                return 0.0
            return float(np.sum(self.base.weights(np.arange(K, self.hi + 1))))
        return self.base.tail_mass(K)

    def geo_tail(self, K, ratio, deg=0):
        K = max(int(K), 0)
        if self.hi is not None:
            if K > self.hi:
                return 0.0
            k = np.arange(max(K, self.lo), self.hi + 1)
            j = (k - K).astype(float)
            return float(np.sum(self.base.weights(k) * ratio**j * j**deg))
        if K >= self.lo:
            return self.base.geo_tail(K, ratio, deg)
        s = self.lo - K
        t0 = self.base.geo_tail(self.lo, ratio, 0)
        rest = t0 if deg == 0 else self.base.geo_tail(self.lo, ratio, 1) + s * t0
        return ratio**s * rest if rest else 0.0

    @property
    def descriptor(self):
        return {"family": "restricted", "base": self.base.descriptor, "lo": self.lo, "hi": self.hi}

    def __repr__(self):
        return f"Restricted({self.base!r}, lo={self.lo}, hi={self.hi})"


class Scaled(Measure):
    """``M * base``."""

    def __init__(self, base, M):
        self.base, self.M = base, float(M)
        self.support_max = base.support_max

    def weights(self, k):
        return self.M * self.base.weights(k)

    def tail_mass(self, K):
        t = self.base.tail_mass(K)
        return self.M * t if t else 0.0

    def geo_tail(self, K, ratio, deg=0):
        t = self.base.geo_tail(K, ratio, deg)
        return self.M * t if t else 0.0

    @property
    def descriptor(self):
        return {"family": "scaled", "base": self.base.descriptor, "M": self.M}

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.M})"


def build_measure(desc):
    """Measure from a descriptor mapping.

    Families: ``zero``; ``table`` (``entries`` mapping or list of pairs);
    ``geometric`` (``C``, ``rho``); ``power`` (``C``, ``p``); ``table_tail``
    (``prefix`` list and a nested ``tail`` descriptor).
    """
    if isinstance(desc, Measure):
        return desc
    if desc is None:
        return zero_measure()
    if not isinstance(desc, dict) or "family" not in desc:
        raise MalformedDescriptor("measure descriptor must be a mapping with a 'family' key")
    d = dict(desc)
    fam = str(d.pop("family")).lower()
    try:
        if fam == "zero":
            m = zero_measure()
        elif fam in ("table", "finite", "finitetable"):
            entries = d.pop("entries", {})
            if isinstance(entries, dict):
                entries = {int(k): float(v) for k, v in entries.items()}
            m = FiniteTable(entries)
        elif fam == "geometric":
            m = Geometric(d.pop("C", 1.0), d.pop("rho"))
        elif fam in ("power", "powertail"):
            m = PowerTail(d.pop("C", 1.0), d.pop("p"))
        elif fam in ("table_tail", "tablewithtail"):
            m = TableWithTail(d.pop("prefix"), build_measure(d.pop("tail")))
        else:
            raise MalformedDescriptor(f"unknown measure family {fam!r}")
    except KeyError as exc:
        raise MalformedDescriptor(f"measure family {fam} needs parameter {exc}") from None
    if d:
        raise MalformedDescriptor(f"unexpected parameters for {fam}: {sorted(d)}")
    return m
