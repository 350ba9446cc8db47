"""Scale function, speed measure and the classification of the boundary at infinity.

The recursions are

    mu_0 = 1,  mu_{k+1} = mu_k * b_k / a_{k+1},
    c_0 = 0,   c_{k+1} - c_k = 1 / (2 b_k mu_k).

Beyond the tail index of the rates both sequences continue geometrically, so
tails such as ``c_inf - c_k`` and the expected passage time to infinity

    w_k = sum_{j>=k} (c_{j+1}-c_j) * sum_{i<=j} mu_i

are evaluated in closed form rather than by subtracting nearly equal numbers.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import Inconclusive, Overflow
from .rates import TailModel

__all__ = ["ScaleSpeedTable", "BoundaryClass", "scale_speed", "classify_boundary"]

PREFIX_BUDGET = 2**16
_WINDOW = 32


def _geo_sum(x, n):
    """sum_{i<n} x**i, vectorised over n, stable at x == 1."""
    n = np.asarray(n, dtype=float)
    if x == 1.0:
        return n
    return -np.expm1(n * math.log(x)) / (1.0 - x) if x > 0 else (n > 0).astype(float)


class ScaleSpeedTable:
    """Prefix of the scale/speed sequences plus closed-form tail accessors.

    Attributes
    ----------
    c, mu : ndarray
        ``c_0..c_K`` and ``mu_0..mu_K``.
    prefix_len : int
        ``K``.
    c_inf_estimate : float
        ``lim c_k``; ``inf`` when the scale is unbounded.
    c_inf_error : float
        Zero for closed-form tails, an extrapolation spread otherwise.
    tail : TailModel or None
        Geometric continuation used beyond the stored core prefix.
    """

    def __init__(self, rates, K, mu, dc, tail, c_inf_error=0.0):
        self.rates = rates
        self.tail = tail
        self._P = len(mu) - 1  # core prefix, at least tail.m
        self._mu = mu
        self._dc = dc
        self._c = np.concatenate([[0.0], np.cumsum(dc)])[: self._P + 1]
        self._M = np.cumsum(mu)
        self.prefix_len = int(K)
        self.c_inf_error = float(c_inf_error)
        if tail is not None and tail.theta < 1:
            # suffix sums of the gaps within the core prefix
            gaps = np.concatenate([np.cumsum(dc[: self._P][::-1])[::-1], [0.0]])
            self._cgap = gaps + dc[self._P] / (1.0 - tail.theta)
            self.c_inf_estimate = float(self._c[self._P] + self._cgap[self._P])
        else:
            self._cgap = None
            self.c_inf_estimate = math.inf
        self._w = None
        self.c = self.c_at(np.arange(K + 1))
        self.mu = self.mu_at(np.arange(K + 1))

    # -- pointwise accessors (any k >= 0) ---------------------------------
    def _need_tail(self, k):
        if self.tail is None and np.max(k, initial=0) > self._P:
            raise Inconclusive("tail", f"no tail model beyond k={self._P}")

    def mu_at(self, k):
        k = np.asarray(k)
        self._need_tail(k)
        P = self._P
        inside = self._mu[np.minimum(k, P)]
        if self.tail is None:
            return inside
        with np.errstate(under="ignore", over="ignore"):
            out = self._mu[P] * np.power(self.tail.rho, np.maximum(k - P, 0).astype(float))
        return np.where(k <= P, inside, out)

    def dc_at(self, k):
        """Scale increments ``c_{k+1} - c_k``."""
        k = np.asarray(k)
        self._need_tail(k)
        P = self._P
        inside = self._dc[np.minimum(k, P)]
        if self.tail is None:
            return inside
        with np.errstate(under="ignore", over="ignore"):
            out = self._dc[P] * np.power(self.tail.theta, np.maximum(k - P, 0).astype(float))
        return np.where(k <= P, inside, out)

    def c_at(self, k):
        k = np.asarray(k)
        self._need_tail(k)
        P = self._P
        inside = self._c[np.minimum(k, P)]
        if self.tail is None:
            return inside
        with np.errstate(over="ignore"):
            out = self._c[P] + self._dc[P] * _geo_sum(self.tail.theta, np.maximum(k - P, 0))
        return np.where(k <= P, inside, out)

    def M_at(self, k):
        """Partial speed mass ``sum_{i<=k} mu_i``; ``M_{-1} = 0``."""
        k = np.asarray(k)
        self._need_tail(k)
        P = self._P
        inside = np.where(k >= 0, self._M[np.clip(k, 0, P)], 0.0)
        if self.tail is None:
            return inside
        rho = self.tail.rho
        with np.errstate(over="ignore"):
            out = self._M[P] + self._mu[P] * rho * _geo_sum(rho, np.maximum(k - P, 0))
        return np.where(k <= P, inside, out)

    def c_gap(self, k):
        """``c_inf - c_k`` without cancellation."""
        if self._cgap is None:
            raise Inconclusive("c_inf", "scale is unbounded or has no tail model")
        k = np.asarray(k)
        P = self._P
        inside = self._cgap[np.minimum(k, P)]
        out = self.dc_at(k) / (1.0 - self.tail.theta)
        return np.where(k <= P, inside, out)

    def w(self, k):
        """Expected passage time to infinity from ``k``, halved: ``E_k zeta = 2 w_k``."""
        th = self._tail_theta_rho()
        theta, rho = th
        if not (theta < 1 and theta * rho < 1):
            return np.full(np.shape(k), math.inf)
        k = np.asarray(k)
        if self._w is None:
            P = self._P
            wP = self._w_closed(P)
            terms = self._dc[:P] * self._M[:P]
            self._w = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]]) + wP
        P = self._P
        inside = self._w[np.minimum(k, P)]
        return np.where(k <= P, inside, self._w_closed(np.maximum(k, P)))

    def _tail_theta_rho(self):
        if self.tail is None:
            raise Inconclusive("R", "no tail model")
        return self.tail.theta, self.tail.rho

    def _w_closed(self, k):
        theta, rho = self.tail.theta, self.tail.rho
        return self.dc_at(k) * (
            self.M_at(np.asarray(k) - 1) / (1 - theta)
            + self.mu_at(k) / ((1 - theta) * (1 - theta * rho))
        )

    def w_majorant(self, K):
        """Terms ``(coef, ratio, deg)`` with ``w_{K+j} <= sum coef ratio**j j**deg``.

        Valid for ``K`` at or beyond the tail index.
        """
        theta, rho = self._tail_theta_rho()
        K = int(K)
        if K < self._P:
            raise ValueError(f"majorant needs K >= {self._P}")
        dcK = float(self.dc_at(K))
        muK = float(self.mu_at(K))
        Mm = float(self.M_at(K - 1))
        if rho == 1.0:
            return [
                (dcK * (Mm / (1 - theta) + muK / (1 - theta) ** 2), theta, 0),
                (dcK * muK / (1 - theta), theta, 1),
            ]
        A = dcK * (Mm + muK / (1 - rho)) / (1 - theta)
        B = -dcK * muK * rho / ((1 - theta * rho) * (1 - rho))
        return [(max(A, 0.0), theta, 0), (max(B, 0.0), theta * rho, 0)]

    def mu_tail(self, K):
        """``sum_{k>=K} mu_k``."""
        if self.tail is None or self.tail.rho >= 1:
            return math.inf
        K, P = int(K), self._P
        head = float(np.sum(self._mu[K:P])) if K < P else 0.0
        return head + float(self.mu_at(max(K, P))) / (1 - self.tail.rho)

    def s_tail(self, K):
        """``sum_{k>=K} c_k mu_k`` in closed form (``inf`` when divergent)."""
        theta, rho = self._tail_theta_rho()
        if not (rho < 1 and theta * rho < 1):
            return math.inf
        K0, K = int(K), max(int(K), self._P)
        head = float(np.sum(self._c[K0:K] * self._mu[K0:K])) if K0 < K else 0.0
        cK, dcK, muK = float(self.c_at(K)), float(self.dc_at(K)), float(self.mu_at(K))
        if theta == 1.0:
            extra = dcK * rho / (1 - rho) ** 2
        else:
            extra = dcK / (theta - 1) * (1 / (1 - theta * rho) - 1 / (1 - rho))
        return head + muK * (cK / (1 - rho) + extra)

    @property
    def tail_start(self):
        """First index from which the geometric continuation holds."""
        return self._P

    @property
    def certified(self):
        return self.tail is not None and self.tail.certified


def _estimate_tail(mu, dc):
    """Extrapolate geometric ratios from the last window of a numeric prefix."""
    th = dc[-_WINDOW:] / dc[-_WINDOW - 1:-1]
    rh = mu[-_WINDOW:] / mu[-_WINDOW - 1:-1]
    spread = max(np.ptp(th) / th[-1], np.ptp(rh) / rh[-1])
    if not np.isfinite(spread) or spread > 1e-8:
        return None, spread
    return TailModel(len(mu) - 1, float(th[-1]), float(rh[-1]), certified=False), spread


def scale_speed(rates, K=64):
    """Scale/speed prefix ``0..K`` with closed-form continuation.

    Parameters
    ----------
    rates : BirthDeathRates
    K : int
        Prefix length, at least 1.

    Returns
    -------
    ScaleSpeedTable

    Raises
    ------
    Overflow
        If a speed weight or scale value leaves the double range.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    tail = rates.tail
    if tail is not None:
        P = max(tail.m, 1)
    else:
        P = max(K, 256)
    a, b, _ = rates.arrays(P + 1)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        ratios = b[:P] / a[1 : P + 1]
        mu = np.concatenate([[1.0], np.cumprod(ratios)])
        dc = 1.0 / (2.0 * b[: P + 1] * mu)
    for name, arr in (("mu", mu), ("c", dc)):
        bad = np.flatnonzero(~np.isfinite(arr) | (arr <= 0))
        if bad.size:
            raise Overflow(int(bad[0]), name)
    err = 0.0
    if tail is None:
        tail, spread = _estimate_tail(mu, dc)
        if tail is not None and tail.theta < 1:
            err = float(dc[-1] / (1 - tail.theta) * max(spread, 1e-12) * 10)
    table = ScaleSpeedTable(rates, K, mu, dc, tail, err)
    if not np.all(np.isfinite(table.mu)) or not np.all(np.isfinite(table.c)):
        bad = np.flatnonzero(~np.isfinite(table.mu) | ~np.isfinite(table.c))
        raise Overflow(int(bad[0]), "mu/c")
    return table


@dataclass(frozen=True)
class BoundaryClass:
    """Boundary type at infinity with the series values behind it.

    ``R_tail``/``S_tail`` are the parts of the series beyond ``prefix_len``
    that were added from the closed-form tail (``inf`` when divergent).
    """

    kind: str
    R_value: float
    S_value: float
    R_tail: float
    S_tail: float
    prefix_len: int
    certified: bool

    @property
    def R_finite(self):
        return math.isfinite(self.R_value)

    @property
    def S_finite(self):
        return math.isfinite(self.S_value)


_KINDS = {(True, True): "Regular", (True, False): "Exit", (False, True): "Entrance", (False, False): "Natural"}


def _margin_ok(x, certified):
    # extrapolated ratios just below 1 cannot separate slow decay from divergence
    return certified or x >= 1.0 or x < 1.0 - 1e-6


def classify_boundary(rates, tol=1e-8, table=None, budget=PREFIX_BUDGET):
    """Classify infinity as Regular, Exit, Entrance or Natural.

    A series is declared finite once its closed-form tail beyond a prefix
    drops below ``tol`` and infinite when the eventual term ratio is at
    least one (the terms then do not vanish).

    Raises
    ------
    Inconclusive
        When neither outcome can be certified within ``budget`` terms.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    table = table if table is not None else scale_speed(rates, 64)
    if table.tail is None:
        raise Inconclusive("R", "tail ratios of the rates could not be extrapolated")
    theta, rho = table.tail.theta, table.tail.rho
    cert = table.tail.certified

    r_div = max(theta, theta * rho)
    s_div = max(rho, theta * rho)
    for name, ratio in (("R", r_div), ("S", s_div)):
        if not _margin_ok(ratio, cert):
            raise Inconclusive(name, f"eventual term ratio {ratio!r} too close to 1")

    K = max(64, table._P)
    R = S = math.inf
    R_tail = S_tail = math.inf
    if r_div < 1:
        while True:
            R_tail = float(table.w(K + 1))
            if R_tail < tol:
                break
            if K >= budget:
                raise Inconclusive("R", f"tail {R_tail:.3g} above tol at prefix {K}")
            K *= 2
        R = float(table.w(0))
    if s_div < 1:
        Ks = K
        while True:
            S_tail = table.s_tail(Ks + 1)
            if S_tail < tol:
                break
            if Ks >= budget:
                raise Inconclusive("S", f"tail {S_tail:.3g} above tol at prefix {Ks}")
            Ks *= 2
        k = np.arange(Ks + 1)
        S = float(np.sum(table.c_at(k) * table.mu_at(k)) + S_tail)
        K = max(K, Ks)
    kind = _KINDS[(math.isfinite(R), math.isfinite(S))]
    return BoundaryClass(kind, R, S, R_tail, S_tail, K, cert)
