"""Transition semigroup of the truncated minimal chain and a Laplace-inversion check."""

from dataclasses import dataclass
from fractions import Fraction
import math

import numpy as np
from scipy.stats import poisson

from .errors import InversionUnstable
from .functions import StateFunction
from .resolvent import DEFAULT_CONTROLS, full_resolvent_field

__all__ = ["semigroup_minimal", "stehfest_weights", "stehfest_invert", "LaplaceCheck",
           "transition_laplace_check"]

POISSON_TAIL = 1e-12
MAX_ORDER = 16


def semigroup_minimal(rates, t, N, f, max_terms=10**7):
    """``P_t f`` for the chain killed on leaving ``{0..N}``, by uniformization.

    Parameters
    ----------
    rates : BirthDeathRates
    t : float
        Nonnegative time.
    N : int
        Truncation level.
    f : array_like or StateFunction
        Values on ``0..N``.

    Returns
    -------
    ndarray
        ``(P_t f)(0..N)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if isinstance(f, StateFunction):
        f = f.values(np.arange(N + 1))
    f = np.asarray(f, dtype=float)[: N + 1]
    if t == 0:
        return f.copy()
    a, b, q = rates.arrays(N)
    lam = float(np.max(q))
    mean = lam * t
    n_max = int(poisson.isf(POISSON_TAIL, mean)) + 1
    if n_max > max_terms:
        raise ValueError(f"uniformization needs {n_max} terms; reduce N or t")
    weights = poisson.pmf(np.arange(n_max + 1), mean)
    # substochastic kernel K = I + Q/lam; mass leaving above N is lost
    diag = 1.0 - q / lam
    up = b[:-1] / lam
    down = a[1:] / lam
    g = f.copy()
    out = weights[0] * g
    for n in range(1, n_max + 1):
        h = diag * g
        h[:-1] += up * g[1:]
        h[1:] += down * g[:-1]
        g = h
        out += weights[n] * g
    return out


def stehfest_weights(order=12):
    """Gaver–Stehfest coefficients ``V_1..V_M`` computed in exact arithmetic."""
    M = int(order)
    if M < 2 or M % 2:
        raise ValueError("Stehfest order must be an even integer >= 2")
    h = M // 2
    V = []
    for k in range(1, M + 1):
        s = Fraction(0)
        for j in range((k + 1) // 2, min(k, h) + 1):
            s += Fraction(
                j**h * math.factorial(2 * j),
                math.factorial(h - j) * math.factorial(j) * math.factorial(j - 1)
                * math.factorial(k - j) * math.factorial(2 * j - k),
            )
        V.append(float((-1) ** (k + h) * s))
    return np.array(V)


def stehfest_invert(F, t, order=12):
    """Approximate ``p(t)`` from its Laplace transform ``F`` (real samples only)."""
    V = stehfest_weights(order)
    ln2t = math.log(2.0) / t
    s = ln2t * np.arange(1, order + 1)
    vals = np.array([F(x) for x in s])
    return ln2t * float(np.dot(V, vals)), ln2t * float(np.dot(np.abs(V), np.abs(vals)))


@dataclass
class LaplaceCheck:
    """Outcome of reconstructing ``p_ij(t)`` and re-transforming it."""

    i: int
    j: int
    alpha: float
    phi: float
    reintegrated: float
    gap: float
    times: np.ndarray
    p_hat: np.ndarray
    row_sums: np.ndarray
    p0: float
    noise: float
    order: int


def transition_laplace_check(rates, table, triple, i, j, alpha, ctrl=DEFAULT_CONTROLS, order=12,
                             nodes=40, threshold=1e-3, eval_eps=1e-14, t0=1e-4):
    """Invert ``alpha -> Phi_ij(alpha)`` numerically and compare its transform.

    ``p_ij(t)`` is reconstructed by Gaver–Stehfest at Gauss–Laguerre nodes,
    then ``int e^{-alpha t} p_ij(t) dt`` is evaluated by the same quadrature
    and compared with ``Phi_ij(alpha)``.  Diagnostic grade: expect three to
    four correct digits.

    Raises
    ------
    InversionUnstable
        If the order exceeds 16 or the weights amplify the evaluation error
        ``eval_eps`` beyond ``threshold``.
    """
    if order > MAX_ORDER:
        raise InversionUnstable(f"Stehfest order {order} exceeds {MAX_ORDER} in double precision")
    fj = StateFunction.indicator([j])
    one = StateFunction.constant(1.0, at_cem=0.0)
    cache = {}

    def fields(s):
        if s not in cache:
            Fj = full_resolvent_field(rates, table, triple, s, fj, ctrl, probe=max(i, j) + 1)
            F1 = full_resolvent_field(rates, table, triple, s, one, ctrl, probe=i + 1)
            cache[s] = (Fj(i), F1(i))
        return cache[s]

    x, w = np.polynomial.laguerre.laggauss(nodes)
    times = x / alpha
    p_hat = np.empty(nodes)
    rows = np.empty(nodes)
    noise = 0.0
    for n, t in enumerate(times):
        p_hat[n], amp = stehfest_invert(lambda s: fields(s)[0], t, order)
        rows[n], amp1 = stehfest_invert(lambda s: fields(s)[1], t, order)
        noise = max(noise, eval_eps * max(amp, amp1))
    if noise > threshold:
        raise InversionUnstable(f"weight amplification gives noise {noise:.3g} > {threshold:.3g}")
    reint = float(np.dot(w, p_hat)) / alpha
    phi = fields(float(alpha))[0]
    p0, _ = stehfest_invert(lambda s: fields(s)[0], t0, order)
    return LaplaceCheck(int(i), int(j), float(alpha), phi, reint, abs(reint - phi), times, p_hat, rows, p0,
                        noise, order)
