"""Birth-death rate families.

A family supplies the down-rates ``a(k)`` (with ``a(0) = 0``) and up-rates
``b(k)``.  Built-in families are *eventually geometric*: from some index ``m``
on, ``a(k+1)/b(k+1) = theta`` and ``b(k)/a(k+1) = rho`` are constant.  This
makes every tail series needed downstream (scale gaps, speed mass, the
expected passage time to infinity) available in closed form, see
:class:`TailModel`.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import MalformedDescriptor, NonPositiveRate

__all__ = [
    "TailModel",
    "BirthDeathRates",
    "build_rates",
    "linear",
    "geometric_regular",
    "geometric_exit",
    "table",
    "custom",
]


@dataclass(frozen=True)
class TailModel:
    """Geometric tail structure valid for indices ``k >= m``.

    ``theta`` is the ratio of consecutive scale increments and ``rho`` the
    ratio of consecutive speed weights.  ``certified`` is False when the
    ratios were extrapolated from a numerical prefix rather than known.
    """

    m: int
    theta: float
    rho: float
    certified: bool = True


@dataclass(frozen=True, eq=False)
class BirthDeathRates:
    family: str
    params: dict
    _a: object = field(repr=False)
    _b: object = field(repr=False)
    tail: TailModel | None = None

    def a(self, k):
        k = np.asarray(k)
        with np.errstate(over="ignore"):
            out = np.asarray(self._a(np.maximum(k, 1)), dtype=float)
        return np.where(k == 0, 0.0, out) * np.ones(k.shape)

    def b(self, k):
        k = np.asarray(k)
        with np.errstate(over="ignore"):
            return np.asarray(self._b(k), dtype=float) * np.ones(k.shape)

    def q(self, k):
        return self.a(k) + self.b(k)

    def arrays(self, n):
        """Rates on states ``0..n`` as ``(a, b, q)``."""
        k = np.arange(n + 1)
        a, b = self.a(k), self.b(k)
        return a, b, a + b

    def safe_level(self, limit):
        """Largest N <= limit with every q(k), k <= N, finite."""
        k = np.arange(limit + 1)
        q = self.q(k)
        bad = np.flatnonzero(~np.isfinite(q))
        return int(limit if bad.size == 0 else bad[0] - 1)

    @property
    def descriptor(self):
        return {"family": self.family, **self.params}


def _check(rates, probe):
    k = np.arange(probe + 1)
    a = rates.a(k)
    b = rates.b(k)
    for kk in range(probe + 1):
        if kk >= 1 and not a[kk] > 0:
            raise NonPositiveRate(kk, "a")
        if not b[kk] > 0:
            raise NonPositiveRate(kk, "b")
    return rates


def linear():
    """Constant rates a_k = b_k = 1 (k >= 1), b_0 = 1: a natural boundary."""
    r = BirthDeathRates(
        "linear", {},
        lambda k: np.ones(np.shape(k)),
        lambda k: np.ones(np.shape(k)),
        TailModel(0, 1.0, 1.0),
    )
    return _check(r, 8)


def geometric_regular(ratio=4.0):
    """b_k = ratio**k, a_k = b_k / sqrt(ratio): regular for every ratio > 1.

    With ratio 4 the speed weights are 2**-k and the scale increments
    2**-(k+1), so c_inf = 1.
    """
    ratio = float(ratio)
    if not ratio > 1:
        raise MalformedDescriptor(f"geometric_regular needs ratio > 1, got {ratio}")
    s = math.sqrt(ratio)
    r = BirthDeathRates(
        "geometric_regular", {"ratio": ratio},
        lambda k: np.power(ratio, k) / s,
        lambda k: np.power(ratio, k),
        TailModel(0, 1.0 / s, 1.0 / s),
    )
    return _check(r, 8)


def geometric_exit(ratio=2.0):
    """b_k = ratio**k, a_k = ratio**(k-1): unit speed weights, an exit boundary."""
    ratio = float(ratio)
    if not ratio > 1:
        raise MalformedDescriptor(f"geometric_exit needs ratio > 1, got {ratio}")
    r = BirthDeathRates(
        "geometric_exit", {"ratio": ratio},
        lambda k: np.power(ratio, np.asarray(k) - 1.0),
        lambda k: np.power(ratio, k),
        TailModel(0, 1.0 / ratio, 1.0),
    )
    return _check(r, 8)


def table(a, b, tail="constant", tail_ratio=None):
    """Tabulated rates on ``0..L-1`` continued by a tail rule.

    ``tail="constant"`` repeats the last entries, ``tail="geometric"``
    multiplies both by ``tail_ratio`` per step.  ``a[0]`` is ignored.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape or a.size < 2:
        raise MalformedDescriptor("table needs equal-length a and b lists with at least 2 entries")
    for k in range(a.size):
        if k >= 1 and not a[k] > 0:
            raise NonPositiveRate(k, "a")
        if not b[k] > 0:
            raise NonPositiveRate(k, "b")
    last = a.size - 1
    if tail == "constant":
        g = 1.0
    elif tail == "geometric":
        if tail_ratio is None or not float(tail_ratio) > 0:
            raise MalformedDescriptor("geometric tail needs a positive tail_ratio")
        g = float(tail_ratio)
    else:
        raise MalformedDescriptor(f"unknown tail rule {tail!r}")

    def extend(vals):
        def fn(k):
            k = np.asarray(k)
            inside = np.minimum(k, last)
            with np.errstate(over="ignore"):
                ext = vals[last] * np.power(g, np.maximum(k - last, 0).astype(float))
            return np.where(k <= last, vals[inside], ext)
        return fn

    theta = a[last] / b[last]
    rho = b[last] / (a[last] * g)
    params = {"a": a.tolist(), "b": b.tolist(), "tail": tail}
    if tail == "geometric":
        params["tail_ratio"] = g
    return BirthDeathRates("table", params, extend(a), extend(b), TailModel(last, theta, rho))


def custom(a, b, probe=64):
    """Rates from callables ``a(k)``, ``b(k)`` accepting integer arrays.

    No tail structure is known; downstream code extrapolates it from a
    numerical prefix and flags results as uncertified.
    """
    if not (callable(a) and callable(b)):
        raise MalformedDescriptor("custom rates need callables a(k) and b(k)")
    r = BirthDeathRates("custom", {}, a, b, None)
    return _check(r, probe)


def _expr(src):
    code = compile(src, "<rate expression>", "eval")
    names = {"np": np, "sqrt": np.sqrt, "exp": np.exp, "log": np.log}

    def fn(k):
        return eval(code, {"__builtins__": {}}, {**names, "k": np.asarray(k, dtype=float)})
    return fn


def build_rates(spec):
    """Build rates from a descriptor mapping with a ``family`` key.

    Recognised families: ``linear``, ``geometric_regular`` (``ratio``),
    ``geometric_exit`` (``ratio``), ``table`` (``a``, ``b``, ``tail``,
    ``tail_ratio``) and ``custom`` (``a``/``b`` callables or expression
    strings in ``k``).
    """
    if isinstance(spec, BirthDeathRates):
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise MalformedDescriptor("rate descriptor must be a mapping with a 'family' key")
    params = dict(spec)
    family = str(params.pop("family")).lower()
    try:
        if family == "linear":
            if params:
                raise MalformedDescriptor(f"linear takes no parameters, got {sorted(params)}")
            return linear()
        if family in ("geometric_regular", "geometricregular"):
            return geometric_regular(**params)
        if family in ("geometric_exit", "geometricexit"):
            return geometric_exit(**params)
        if family == "table":
            return table(**params)
        if family == "custom":
            a, b = params.pop("a"), params.pop("b")
            a = _expr(a) if isinstance(a, str) else a
            b = _expr(b) if isinstance(b, str) else b
            return custom(a, b, **params)
    except TypeError as exc:
        raise MalformedDescriptor(f"bad parameters for {family}: {exc}") from None
    except KeyError as exc:
        raise MalformedDescriptor(f"{family} needs parameter {exc}") from None
    raise MalformedDescriptor(f"unknown rate family {family!r}")
