"""Distances between step paths under the state metric ``r``.

``dprime`` is the convergence-in-measure metric, evaluated exactly up to a
known tail; ``skorohod_j1_upper`` bounds the finite-horizon J1 distance from
above by optimising over piecewise linear time changes that match jumps.
"""

import math

import numpy as np
from numba import njit

from .states import embed, metric_r_codes

__all__ = ["dprime", "dprime_tail_bound", "skorohod_j1_upper", "local_uniform_distance"]


def _phi(x):
    return x / (1.0 + x)


def _merged(p1, p2, T):
    """Breakpoints in ``[0, T)`` and the state pairs on each piece."""
    B = np.union1d(p1.times[p1.times < T], p2.times[p2.times < T])
    return B, p1.eval(B), p2.eval(B)


def dprime_tail_bound(Jmax):
    """``sum_{j > Jmax} j 2^-j = (Jmax + 2) 2^-Jmax``."""
    return (Jmax + 2) * 2.0 ** (-Jmax)


def dprime(p1, p2, Jmax=40):
    """``sum_{j<=Jmax} 2^-j int_0^j phi(r(p1(t), p2(t))) dt`` and the tail bound.

    Paths are extended past their horizons by their final states.

    Examples
    --------
    >>> from bdp.pathsim import CadlagPath
    >>> a = CadlagPath([0.0], [0], [False], 1.0)
    >>> b = CadlagPath([0.0], [1], [False], 1.0)
    >>> v, tail = dprime(a, b, 40)
    >>> abs(v - 2 / 3) <= tail
    True
    """
    if Jmax < 1:
        raise ValueError("Jmax must be >= 1")
    B, s1, s2 = _merged(p1, p2, float(Jmax))
    val = _phi(metric_r_codes(s1, s2))
    edges = np.append(B, float(Jmax))
    # integral of the step integrand from 0 to each integer j
    cum = np.concatenate([[0.0], np.cumsum(val * np.diff(edges))])
    js = np.arange(1, Jmax + 1, dtype=float)
    idx = np.searchsorted(edges, js, side="right") - 1
    idx = np.minimum(idx, val.size - 1)
    partial = cum[idx] + val[idx] * (js - edges[idx])
    partial[js >= edges[-1]] = cum[-1]
    value = math.fsum(partial * 2.0 ** (-js))
    return value, dprime_tail_bound(Jmax)


def local_uniform_distance(p1, p2, T):
    """``sup_{t <= T} r(p1(t), p2(t))`` over the merged breakpoints."""
    if not T > 0:
        raise ValueError("T must be positive")
    B, s1, s2 = _merged(p1, p2, float(T))
    # the value at T itself is included (right-continuity makes it a limit point of [0, T])
    s1 = np.append(s1, p1.eval(float(T)))
    s2 = np.append(s2, p2.eval(float(T)))
    return float(np.max(metric_r_codes(s1, s2)))


def _jumps(p, T):
    """Knots ``0 < jumps < T`` where the function changes value, with the state after each knot."""
    t = p.times[p.times < T]
    s = p.eval(t)
    keep = np.ones(t.size, dtype=bool)
    keep[1:] = s[1:] != s[:-1]
    return np.append(t[keep], T), s[keep]


@njit(cache=True)
def _segment_cost(S, e1, i0, i1, Tt, e2, j0, j1):
    """Sup of ``|e1(x) - e2(lam(x))|`` for lam linear from ``[S_i0, S_i1]`` onto ``[T_j0, T_j1]``."""
    a0, a1, b0 = S[i0], S[i1], Tt[j0]
    scale = (a1 - a0) / (Tt[j1] - b0)
    k1, k2 = i0, j0
    c = abs(e1[k1] - e2[k2])
    while True:
        x1 = S[k1 + 1] if k1 + 1 < i1 else np.inf
        x2 = a0 + (Tt[k2 + 1] - b0) * scale if k2 + 1 < j1 else np.inf
        x = min(x1, x2)
        if not x < a1:
            return c
        if x1 == x:
            k1 += 1
        if x2 == x:
            k2 += 1
        c = max(c, abs(e1[k1] - e2[k2]))


@njit(cache=True)
def _j1_dp(S, e1, Tt, e2, W):
    n, m = S.size, Tt.size
    best = np.full((n, m), np.inf)
    best[0, 0] = 0.0
    # the identity is the direct move to the end; its cost bounds every useful partial path
    best[n - 1, m - 1] = _segment_cost(S, e1, 0, n - 1, Tt, e2, 0, m - 1)
    for i in range(n - 1):
        for j in range(m - 1):
            cur = best[i, j]
            if cur >= best[n - 1, m - 1]:
                continue
            c = max(cur, _segment_cost(S, e1, i, n - 1, Tt, e2, j, m - 1))
            if c < best[n - 1, m - 1]:
                best[n - 1, m - 1] = c
            for i2 in range(i + 1, min(n - 1, i + W + 2)):
                for j2 in range(j + 1, min(m - 1, j + W + 2)):
                    disp = abs(S[i2] - Tt[j2])
                    lim = min(best[i2, j2], best[n - 1, m - 1])
                    if disp >= lim or cur >= lim:
                        continue
                    c = max(cur, disp, _segment_cost(S, e1, i, i2, Tt, e2, j, j2))
                    if c < best[i2, j2]:
                        best[i2, j2] = c
    return best[n - 1, m - 1]


def skorohod_j1_upper(p1, p2, T, grid=4):
    """Upper bound on the J1 distance on ``[0, T]`` under the state metric ``r``.

    Candidate time changes are piecewise linear and send a monotone
    selection of jump times of ``p1`` onto jump times of ``p2``.  For such a
    time change the cost is the larger of the maximal displacement of the
    matched knots and the sup distance after alignment; the best candidate is
    found by dynamic programming over matched pairs.

    Parameters
    ----------
    grid : int or None
        Maximal number of jumps of either path skipped between consecutive
        matched pairs (``None``: unrestricted).  The identity time change is
        always a candidate, so the bound never exceeds
        ``local_uniform_distance(p1, p2, T)``, and enlarging ``grid`` can only
        lower the result.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    T = float(T)
    S, s1 = _jumps(p1, T)
    Tt, s2 = _jumps(p2, T)
    W = max(S.size, Tt.size) if grid is None else int(grid)
    best = _j1_dp(S, embed(s1), Tt, embed(s2), W)
    at_T = float(metric_r_codes(p1.eval(T), p2.eval(T)))
    return max(float(best), at_T)
