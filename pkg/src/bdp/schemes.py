"""Approximating triples (truncation, tail-shift, Wang) and convergence diagnostics.

A *scheme* is a callable ``n -> ParameterTriple``.  The reports tabulate the
gaps between the scheme and its target, both at the level of the triples
(pointwise convergence of the parameters and of ``nu(1 - u^min)``) and at
the level of resolvent fields.
"""

from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from .errors import CInfUnavailable, Inconclusive, TailUnbounded, ZeroDenominator
from .functions import StateFunction
from .measures import FiniteTable, Restricted
from .resolvent import (
    DEFAULT_CONTROLS,
    MinimalSolution,
    ResolventField,
    _series,
    full_resolvent_field,
    minimal_resolvent_column,
)
from .triple import ParameterTriple

__all__ = [
    "truncate_triple",
    "tailshift_triple",
    "wang_triple",
    "truncation_scheme",
    "tailshift_scheme",
    "wang_scheme",
    "constant_scheme",
    "GapReport",
    "triple_convergence_report",
    "resolvent_convergence_report",
    "wang_limit_checks",
    "project_to_Cn",
    "DEFAULT_N_GRID",
]

DEFAULT_N_GRID = (2, 4, 8, 16, 32)


def truncate_triple(triple, n):
    """Keep ``nu`` on ``{0..n}`` only; ``gamma`` and ``beta`` unchanged."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    w = triple.nu.weights(np.arange(n + 1))
    return ParameterTriple(triple.gamma, triple.beta, FiniteTable.from_array(w))


def tailshift_triple(triple, n):
    """Remove ``nu`` on ``{0..n}`` and keep the tail beyond ``n``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return ParameterTriple(triple.gamma, triple.beta, Restricted(triple.nu, n + 1))


def _cgap_tail_series(table, nu, n, rel_tol=1e-16):
    """``sum_{k>=n} (c_inf - c_k) nu_k`` with a certified tail bound."""
    theta = table.tail.theta
    if nu.support_max is not None:
        if nu.support_max < n:
            return 0.0, 0.0
        k = np.arange(n, nu.support_max + 1)
        return float(np.sum(table.c_gap(k) * nu.weights(k))), 0.0
    K = max(2 * n, table.tail_start, n + 1)
    while True:
        k = np.arange(n, K)
        val = float(np.sum(table.c_gap(k) * nu.weights(k)))
        bound = float(table.c_gap(K)) * nu.geo_tail(K, theta, 0)
        if not math.isfinite(bound):
            raise TailUnbounded(f"sum of (c_inf - c_k) nu_k has no finite tail bound from {K}")
        if bound <= rel_tol * max(val, 1e-300) or bound < 1e-300:
            return val, bound
        if K > 2**16:
            raise TailUnbounded(f"tail bound {bound:.3g} still large at prefix {K}")
        K *= 2


def wang_triple(rates, table, triple, n):
    """Doob triple of the process observed off its excursions from infinity.

    ``gamma`` is kept, ``beta`` becomes 0, ``nu`` is kept below ``n``, all
    mass from ``n`` on (plus the reflecting weight) is moved to ``n``::

        nu_n = (beta/2 + sum_{k>=n} (c_inf - c_k) nu_k) / (c_inf - c_n)

    Raises
    ------
    CInfUnavailable
        If ``c_inf`` is infinite or has no certified closed form.
    TailUnbounded
        If the weighted tail series cannot be bounded.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if table.tail is None or not math.isfinite(table.c_inf_estimate):
        raise CInfUnavailable("Wang's construction needs a finite c_inf")
    s, _ = _cgap_tail_series(table, triple.nu, n)
    w = np.zeros(n + 1)
    w[:n] = triple.nu.weights(np.arange(n))
    w[n] = (0.5 * triple.beta + s) / float(table.c_gap(n))
    return ParameterTriple(triple.gamma, 0.0, FiniteTable.from_array(w))


def truncation_scheme(triple):
    return lambda n: truncate_triple(triple, n)


def tailshift_scheme(triple):
    return lambda n: tailshift_triple(triple, n)


def wang_scheme(rates, table, triple):
    return lambda n: wang_triple(rates, table, triple, n)


def constant_scheme(triple):
    return lambda n: triple


# -- reports --------------------------------------------------------------------

@dataclass
class GapReport:
    """Rows of ``(n, quantity, value, bound, pass)``.

    ``pass`` is True/False for asserted rows and None for raw tabulations.
    """

    rows: list = field(default_factory=list)
    title: str = ""

    def add(self, n, quantity, value, bound, ok):
        self.rows.append((int(n), str(quantity), float(value), float(bound), ok))

    def quantities(self):
        seen = []
        for r in self.rows:
            if r[1] not in seen:
                seen.append(r[1])
        return seen

    def series(self, quantity):
        """``(n, value, bound, pass)`` tuples of one quantity in n order."""
        return [(r[0], r[2], r[3], r[4]) for r in self.rows if r[1] == quantity]

    def last(self, quantity):
        s = self.series(quantity)
        return s[-1] if s else None

    def clause_pass(self):
        """Per quantity, the pass flag at the largest n (None if not asserted)."""
        return {q: self.last(q)[3] for q in self.quantities()}

    @property
    def passed(self):
        flags = [v for v in self.clause_pass().values() if v is not None]
        return all(flags)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "quantity", "value", "bound", "pass"])
        for n, q, v, b, ok in self.rows:
            w.writerow([n, q, repr(v), repr(b), "" if ok is None else str(bool(ok)).lower()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rd = csv.reader(io.StringIO(text))
        header = next(rd)
        if header != ["n", "quantity", "value", "bound", "pass"]:
            raise ValueError(f"unexpected header {header}")
        rep = cls()
        for n, q, v, b, ok in rd:
            rep.rows.append((int(n), q, float(v), float(b), None if ok == "" else ok == "true"))
        return rep


def _nu_v(nu, sol, table, alpha, tol):
    """``nu(1 - u^min_alpha)`` with its tail bound."""
    K0 = max(64, table.tail_start)
    val, bound, _ = _series(nu, sol.v, table.w_majorant, 2.0 * alpha, tol, K0)
    return val, bound


def triple_convergence_report(rates, table, seq, target, alphas=(1.0,), n_grid=DEFAULT_N_GRID,
                              k_probe=8, threshold=1e-6, ctrl=DEFAULT_CONTROLS):
    """Gaps of the triple-convergence clauses along ``n_grid``.

    Quantities: ``gamma``, ``beta``, ``nu_pointwise`` (max over
    ``k <= k_probe``) and ``nu(1-u)@alpha=<a>`` (signed, scheme minus target).
    A row passes when ``|value| <= threshold + bound``.
    """
    rep = GapReport(title="triple convergence")
    sols = {a: MinimalSolution(rates, table, a, ctrl) for a in alphas}
    tol = ctrl.series_tol
    targets = {a: _nu_v(target.nu, sols[a], table, a, tol) for a in alphas}
    kk = np.arange(k_probe + 1)
    for n in n_grid:
        tn = seq(n)
        g = abs(tn.gamma - target.gamma)
        rep.add(n, "gamma", g, 0.0, g <= threshold)
        b = abs(tn.beta - target.beta)
        rep.add(n, "beta", b, 0.0, b <= threshold)
        d = float(np.max(np.abs(tn.nu.weights(kk) - target.nu.weights(kk))))
        rep.add(n, "nu_pointwise", d, 0.0, d <= threshold)
        for a in alphas:
            val, bnd = _nu_v(tn.nu, sols[a], table, a, tol)
            tval, tb = targets[a]
            gap = val - tval
            bound = bnd + tb
            rep.add(n, f"nu(1-u)@alpha={a:g}", gap, bound, abs(gap) <= threshold + bound)
    return rep


def resolvent_convergence_report(rates, table, seq, target, alpha, f, K=32, n_grid=DEFAULT_N_GRID,
                                 threshold=1e-6, ctrl=DEFAULT_CONTROLS):
    """Gaps between resolvent fields of the scheme and of the target.

    Quantities: ``sup_k<=K|R_n f - R f|``, ``|R_n f(inf) - R f(inf)|`` and
    ``sup_k<=K|u_n - u|`` where ``u`` is the lifetime transform of the full
    process.  Rows pass when the gap is below ``threshold`` plus the combined
    error bounds; ``trend`` rows report whether the gaps are nonincreasing.
    """
    rep = GapReport(title="resolvent convergence")
    F = full_resolvent_field(rates, table, target, alpha, f, ctrl, probe=max(K, ctrl.probe))
    uF = F.lifetime_transform()
    hist = {"sup": [], "inf": [], "u": []}
    for n in n_grid:
        Fn = full_resolvent_field(rates, table, seq(n), alpha, f, ctrl, probe=max(K, ctrl.probe))
        eb = Fn.error_bound + F.error_bound
        d_sup = float(np.max(np.abs(Fn.values[: K + 1] - F.values[: K + 1])))
        d_inf = abs(Fn.value_inf - F.value_inf)
        d_u = float(np.max(np.abs(Fn.lifetime_transform()[: K + 1] - uF[: K + 1])))
        rep.add(n, f"sup_k<={K}|Rn f-R f|", d_sup, eb, d_sup <= threshold + eb)
        rep.add(n, "|Rn f(inf)-R f(inf)|", d_inf, eb, d_inf <= threshold + eb)
        rep.add(n, f"sup_k<={K}|un-u|", d_u, eb, d_u <= threshold + eb)
        hist["sup"].append(d_sup)
        hist["inf"].append(d_inf)
        hist["u"].append(d_u)
    for key, name in (("sup", "trend_sup"), ("inf", "trend_inf"), ("u", "trend_u")):
        h = np.array(hist[key])
        mono = bool(np.all(np.diff(h) <= 1e-12 + 1e-9 * h[:-1])) if h.size > 1 else True
        rep.add(n_grid[-1], name, float(mono), 0.0, None)
    return rep


def wang_limit_checks(rates, table, alphas=(1.0,), k_probe=0, n_grid=(8, 16, 24), boundary=None,
                      ctrl=DEFAULT_CONTROLS):
    """Tabulate the two limit ratios behind Wang's construction.

    ``Phi^min_{nk}/(c_inf - c_n)`` is compared with ``2 u(k) mu_k`` and
    ``(1 - u(n))/(c_inf - c_n)`` with ``2 alpha mu(u)``; values are relative
    gaps.  When ``mu`` has infinite mass (exit boundary) the second target
    is unavailable and raw ratios are reported without pass flags.
    """
    if not math.isfinite(table.c_inf_estimate):
        raise CInfUnavailable("limit ratios need a finite c_inf")
    rep = GapReport(title="Wang limit ratios")
    regular = math.isfinite(table.mu_tail(0))
    k = int(k_probe)
    for a in alphas:
        col = minimal_resolvent_column(rates, table, a, k, ctrl)
        u = col.u_min
        v = MinimalSolution(rates, table, a, ctrl).v
        t1 = 2.0 * u[k] * float(table.mu_at(k))
        if regular:
            Km = 64
            while table.mu_tail(Km) > 1e-16 and Km < u.size // 2:
                Km *= 2
            muu = float(np.sum(table.mu_at(np.arange(Km)) * u[:Km])) + table.mu_tail(Km)
            t2 = 2.0 * a * muu
        prev = [math.inf, math.inf]
        for n in n_grid:
            g = float(table.c_gap(n))
            r1 = col.phi_column[n] / g
            r2 = v[n] / g
            rel1 = abs(r1 - t1) / t1
            rep.add(n, f"ratio1_relgap@alpha={a:g},k={k}", rel1, 0.0, rel1 <= prev[0])
            rep.add(n, f"ratio1_raw@alpha={a:g},k={k}", r1, 0.0, r1 > 0)
            if regular:
                rel2 = abs(r2 - t2) / t2
                rep.add(n, f"ratio2_relgap@alpha={a:g}", rel2, 0.0, rel2 <= prev[1])
                prev[1] = rel2
            rep.add(n, f"ratio2_raw@alpha={a:g}", r2, 0.0, None if not regular else r2 > 0)
            prev[0] = rel1
    return rep


def project_to_Cn(rates, table, triple_n, g, N=None, source=None):
    """Adjust ``g`` on ``{0..N}`` so that it satisfies the boundary condition of ``triple_n``.

    Main branch: ``g_n = g + chi 1_{0..N}`` with
    ``chi = [sum_k (g(inf) - g(k)) nu_k + gamma g(inf)] / sum_{k<=N} nu_k``.
    With ``N=None`` the smallest ``N`` carrying positive mass is used.

    When ``source`` is a triple with ``|nu| = 0`` and ``beta > 0`` (the
    reflecting target behind a Wang sequence), ``g_n`` differs from ``g`` only
    at ``n`` (the atom of ``triple_n``):
    ``g_n(n) = g(inf) + (2 gamma / beta) g(inf) (c_inf - c_n)``.

    Returns
    -------
    StateFunction
        With attributes ``chi`` and ``support_depth``.

    Raises
    ------
    ZeroDenominator
        If ``nu`` has no mass on ``{0..N}``.
    """
    nu = triple_n.nu
    if isinstance(g, ResolventField):
        base = g.as_function()
        g_inf = g.value_inf
        deficit = g.deficit
    else:
        base = g
        g_inf = g.at_inf
        deficit = None
    if source is not None and source.nu_mass == 0 and source.beta > 0:
        n = nu.support_max
        if n is None or n < 0:
            raise ZeroDenominator("Wang triple has no atom")
        M = max(n + 1, base.tail_from or 0)
        vals = base.values(np.arange(M))
        vals[n] = g_inf + (2.0 * source.gamma / source.beta) * g_inf * float(table.c_gap(n))
        out = StateFunction.from_array(vals, tail=g_inf, at_cem=base.at_cem, name="g_n")
        out.chi = vals[n] - base.values(n)
        out.support_depth = n
        return out
    if N is None:
        if nu.support_max is not None and nu.support_max < 0:
            raise ZeroDenominator("nu has no mass")
        N = 0
        while nu.partial_sum(N) <= 0:
            N += 1
            if N > 2**20:
                raise ZeroDenominator("nu has no mass within 2**20 states")
    mass = nu.partial_sum(N)
    if not mass > 0:
        raise ZeroDenominator(f"nu has no mass on 0..{N}")
    if nu.support_max is None:
        raise TailUnbounded("projection needs a finitely supported nu")
    Ks = nu.support_max + 1
    k = np.arange(Ks)
    d = deficit[:Ks] if deficit is not None else g_inf - base.values(k)
    s = float(np.sum(d * nu.weights(k))) if Ks else 0.0
    chi = (s + triple_n.gamma * g_inf) / mass
    M = max(N + 1, base.tail_from or 0, Ks)
    vals = base.values(np.arange(M))
    vals[: N + 1] += chi
    out = StateFunction.from_array(vals, tail=g_inf, at_cem=base.at_cem, name="g_n")
    out.chi = chi
    out.support_depth = N
    return out
