"""Minimal resolvent, lifetime transform and the full resolvent of a triple.

Minimal quantities come from Dirichlet truncations on ``{0..N}``: the
truncated solutions increase to the minimal ones as ``N`` grows, so ``N`` is
doubled until the relative change on the probed states drops below the
tolerance.  ``v = 1 - u`` is always solved for directly from the right hand
side ``alpha * 1``, which keeps differences such as ``F(inf) - F(k)`` free
of cancellation.

For a triple ``(gamma, beta, nu)`` the full resolvent is

    R f(i) = R^min f(i) + u(i) * Lam,
    Lam    = [nu(R^min f) + beta mu(u f)] / [gamma + nu(1 - u) + beta alpha mu(u)],

and ``Lam`` is also the value at infinity.
"""

from dataclasses import dataclass, field
import functools
import math

import numpy as np

from . import _tridiag
from .errors import (
    CrossCheckFailed,
    DivergentSeries,
    Inconclusive,
    InadmissibleTriple,
    NoConvergence,
    NotDoob,
    TailUnbounded,
)
from .functions import StateFunction
from .scale import classify_boundary
from .states import CEMETERY_CODE, INFINITY_CODE, StatePoint, as_code
from .triple import check_admissible, weighted_tail_series

__all__ = [
    "SolveControls",
    "MinimalSolveResult",
    "MinimalSolution",
    "ResolventField",
    "PiDistribution",
    "minimal_solution",
    "minimal_resolvent_column",
    "minimal_resolvent_apply",
    "u_min",
    "full_resolvent_field",
    "pi_distribution",
    "apply_Q",
    "boundary_residual",
    "boundary_residual_report",
]


@dataclass(frozen=True)
class SolveControls:
    """Truncation controls.

    ``fixed_N`` switches off adaptivity and solves once at that level.
    ``series_tol`` bounds the unsummed tails of nu- and mu-series.
    """

    N0: int = 64
    Nmax: int = 2**20
    tol: float = 1e-10
    probe: int = 128
    fixed_N: int | None = None
    series_tol: float = 1e-14


DEFAULT_CONTROLS = SolveControls()


@dataclass
class _Outcome:
    X: np.ndarray
    N: int
    rel_change: float
    converged: bool


class _Solver:
    """Factorisations of ``alpha - Q_N`` for one (rates, alpha), reused across N."""

    def __init__(self, rates, alpha):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        self.rates = rates
        self.alpha = float(alpha)
        self._fac = {}
        self.N_safe = None

    def factor(self, N):
        if N not in self._fac:
            a, b, q = self.rates.arrays(N)
            p, lo = _tridiag.factor(np.ascontiguousarray(a), np.ascontiguousarray(b), self.alpha)
            self._fac[N] = (b, p, lo)
        return self._fac[N]

    def cap(self, N):
        """Largest admissible level <= N with finite rates."""
        if self.N_safe is not None and N > self.N_safe:
            return self.N_safe
        a, b, q = self.rates.arrays(N)
        bad = np.flatnonzero(~np.isfinite(q))
        if bad.size:
            self.N_safe = int(bad[0]) - 1
            return self.N_safe
        return N

    def solve_at(self, N, rhs):
        b, p, lo = self.factor(N)
        return _tridiag.solve(p, lo, b, np.ascontiguousarray(rhs(N), dtype=float))

    def adaptive(self, rhs, probe, ctrl, increasing=None):
        """Double N until columns change by less than ``ctrl.tol`` on ``0..probe``.

        ``increasing`` marks columns that must be nondecreasing in N.
        """
        if ctrl.fixed_N is not None:
            N = int(ctrl.fixed_N)
            return _Outcome(self.solve_at(N, rhs), N, math.nan, False)
        N = self.cap(min(max(ctrl.N0, 2 * probe), ctrl.Nmax))
        if N <= probe:
            raise NoConvergence(N, None)
        prev = self.solve_at(N, rhs)
        rel = math.nan
        while True:
            N_next = self.cap(min(2 * N, ctrl.Nmax))
            if N_next <= N:
                raise NoConvergence(N, rel)
            X = self.solve_at(N_next, rhs)
            rows = min(probe, N) + 1
            new, old = X[:rows], prev[:rows]
            if increasing is not None:
                inc = np.asarray(increasing)
                slack = 1e-12 * np.abs(new[:, inc]) + 1e-300
                if np.any(new[:, inc] < old[:, inc] - slack):
                    i = int(np.argwhere(new[:, inc] < old[:, inc] - slack)[0, 0])
                    raise CrossCheckFailed(i, float(np.max(old[:, inc] - new[:, inc])))
            with np.errstate(divide="ignore", invalid="ignore"):
                scale = np.maximum(np.abs(new), np.abs(old))
                rc = np.where(scale > 0, np.abs(new - old) / scale, 0.0)
            rel = float(np.max(rc))
            N = N_next
            if rel < ctrl.tol:
                return _Outcome(X, N, rel, True)
            prev = X


@functools.lru_cache(maxsize=256)
def _solver(rates, alpha):
    return _Solver(rates, alpha)


def _w_bound(table, N):
    """``2 w_{N+1}``: a bound on the truncation error per unit payload."""
    try:
        val = float(table.w(N + 1))
    except Inconclusive:
        return math.nan
    return 2.0 * val if math.isfinite(val) else math.nan


@dataclass
class MinimalSolveResult:
    """One column of the minimal resolvent together with ``u^min``."""

    phi_column: np.ndarray
    u_min: np.ndarray
    N: int
    converged: bool
    rel_change: float
    j: int = 0
    alpha: float = 1.0


class MinimalSolution:
    """``u``, ``v = 1 - u`` and (optionally) ``R^min f`` at a common level N.

    Attributes
    ----------
    u, v : ndarray
        On ``0..N``.
    R : ndarray or None
        ``R^min f`` for the payload, on ``0..N``.
    trunc_err : float
        ``2 w_{N+1}`` when the boundary is regular or an exit, else nan.
    """

    def __init__(self, rates, table, alpha, ctrl=DEFAULT_CONTROLS, f=None, probe=None):
        self.rates, self.table, self.alpha, self.ctrl = rates, table, float(alpha), ctrl
        probe = ctrl.probe if probe is None else probe
        solver = _solver(rates, self.alpha)
        alpha = self.alpha
        cols_f = []
        if f is not None:
            pos, neg = f.split()
            cols_f = [pos, neg]

        def rhs(N):
            k = np.arange(N + 1)
            R = np.zeros((N + 1, 2 + len(cols_f)))
            R[:, 0] = alpha
            R[N, 1] = float(rates.b(N))
            for c, g in enumerate(cols_f):
                R[:, 2 + c] = g.values(k)
            return R

        inc = [True, False] + [True] * len(cols_f)
        out = solver.adaptive(rhs, probe, ctrl, increasing=inc)
        X = out.X
        self.N, self.rel_change, self.converged = out.N, out.rel_change, out.converged
        self.v = X[:, 0]
        self.u = X[:, 1]
        gap = np.abs(self.u + self.v - 1.0)
        tol = ctrl.tol if math.isfinite(out.rel_change) else 1e-12
        if np.any(gap > 10 * max(tol, 1e-13)):
            i = int(np.argmax(gap))
            raise CrossCheckFailed(i, float(gap[i]))
        self.R = X[:, 2] - X[:, 3] if f is not None else None
        self.trunc_err = _w_bound(table, self.N) if table is not None else math.nan
        self.probe = probe


def minimal_solution(rates, table, alpha, ctrl=DEFAULT_CONTROLS, f=None, probe=None):
    return MinimalSolution(rates, table, alpha, ctrl, f, probe)


def minimal_resolvent_column(rates, table, alpha, j, ctrl=DEFAULT_CONTROLS):
    """Column ``Phi^min_{. j}(alpha)`` on ``0..N`` and ``u^min`` at the same level.

    Parameters
    ----------
    rates : BirthDeathRates
    table : ScaleSpeedTable or None
    alpha : float
    j : int
    ctrl : SolveControls

    Returns
    -------
    MinimalSolveResult

    Raises
    ------
    NoConvergence
        When ``ctrl.tol`` is not met before ``ctrl.Nmax`` (or the last level
        at which the rates are finite).
    """
    j = int(j)
    if j < 0:
        raise ValueError("j must be a nonnegative state")
    solver = _solver(rates, float(alpha))

    def rhs(N):
        R = np.zeros((N + 1, 2))
        if j <= N:
            R[j, 0] = 1.0
        R[N, 1] = float(rates.b(N))
        return R

    probe = max(ctrl.probe, j)
    out = solver.adaptive(rhs, probe, ctrl, increasing=[True, False])
    return MinimalSolveResult(out.X[:, 0], out.X[:, 1], out.N, out.converged, out.rel_change, j, float(alpha))


def minimal_resolvent_apply(rates, table, alpha, f, ctrl=DEFAULT_CONTROLS, probe=None):
    """``R^min f`` on ``0..N`` for a payload ``f``."""
    return MinimalSolution(rates, table, alpha, ctrl, f, probe).R


def u_min(rates, table, alpha, ctrl=DEFAULT_CONTROLS):
    """``u^min_alpha(i) = E_i exp(-alpha zeta)`` on ``0..N``.

    Computed from the boundary problem with ``u(N+1) = 1`` and cross-checked
    against ``1 - alpha * sum_j Phi^min_{ij}``.

    Raises
    ------
    CrossCheckFailed
        If the two routes disagree by more than ``10 * ctrl.tol``.
    """
    return MinimalSolution(rates, table, alpha, ctrl).u


# -- full resolvent -----------------------------------------------------------

@dataclass
class ResolventField:
    """``x -> R_alpha f(x)`` on ``0..N``, infinity and the cemetery.

    ``deficit[k] = R f(inf) - R f(k)`` is stored separately because it is
    computed without cancellation.
    """

    alpha: float
    values: np.ndarray
    value_inf: float
    value_cem: float
    truncation_level: int
    error_bound: float
    deficit: np.ndarray
    u: np.ndarray
    v: np.ndarray
    R_min: np.ndarray
    Lam: float
    D: float
    numerator: float
    payload: StateFunction = field(repr=False, default=None)
    probe: int = 0
    gamma: float = 0.0

    def __call__(self, x):
        c = as_code(x)
        if c == CEMETERY_CODE:
            return self.value_cem
        if c == INFINITY_CODE:
            return self.value_inf
        return float(self.values[c])

    def lifetime_transform(self):
        """``E_i exp(-alpha zeta)`` for the full process: ``u^min * gamma / D``."""
        return self.u * (self.gamma / self.D)

    def as_function(self, name="R f"):
        """The field as a payload (states beyond N take the value at infinity)."""
        return StateFunction.from_array(self.values, tail=self.value_inf, at_cem=self.value_cem, name=name)

    def deficit_sup(self, k):
        """Bound on ``|R f(inf) - R f(k)|`` beyond the stored range, per ``w_k``."""
        return 2.0 * (abs(self.Lam) * self.alpha + self.payload.sup)


def _series(nu, arr, majorant, coef, tol, K0):
    """``sum_k nu_k arr_k`` where ``|arr_{K+j}| <= coef * majorant``."""
    if nu.support_max is not None:
        K = nu.support_max + 1
        if K > arr.size:
            raise NoConvergence(arr.size - 1, None)
        k = np.arange(K)
        return (float(np.sum(nu.weights(k) * arr[:K])) if K else 0.0), 0.0, K
    try:
        scaled = lambda K: [(coef * c, r, d) for c, r, d in majorant(K)]  # noqa: E731
        value, bound, K = weighted_tail_series(nu, lambda k: arr[k], scaled, tol, K0=K0,
                                               budget=arr.size - 1)
    except Inconclusive as exc:
        raise DivergentSeries(str(exc)) from None
    return value, bound, K


def _series_depth(nu, table, tol, K0, budget):
    """Prefix size needed for nu-series against the ``w``-majorant."""
    if nu.support_max is not None:
        return nu.support_max + 1
    K = K0
    while K < budget:
        b = nu.series_bound(K, table.w_majorant(K))
        if b < tol:
            return K
        K *= 2
    b = nu.series_bound(K, table.w_majorant(K))
    if not math.isfinite(b):
        raise DivergentSeries(f"nu-series tail has no finite bound at prefix {K}")
    return K


def _mu_depth(table, tol, K0, budget):
    K = K0
    while K < budget and table.mu_tail(K) >= tol:
        K *= 2
    return K


def full_resolvent_field(rates, table, triple, alpha, f, ctrl=DEFAULT_CONTROLS, probe=None,
                         boundary=None, check=True):
    """Resolvent ``R_alpha f`` of the process with boundary parameters ``triple``.

    Parameters
    ----------
    rates, table : BirthDeathRates, ScaleSpeedTable
    triple : ParameterTriple or None
        ``None`` gives the minimal resolvent (value 0 at infinity).
    alpha : float
    f : StateFunction
        Bounded payload; a nonzero value at the cemetery adds ``f(∂)/alpha``.
    probe : int, optional
        States on which convergence is enforced (default ``ctrl.probe``).

    Raises
    ------
    InadmissibleTriple
        If the triple is not admissible and not the reduced minimal case.
    DivergentSeries
        If a nu-series has no certified tail bound.
    """
    alpha = float(alpha)
    f_cem = f.at_cem
    f0 = f.shifted_to_zero_at_cem()
    probe = ctrl.probe if probe is None else probe
    minimal = triple is None or triple.is_reduced_minimal
    tol = ctrl.series_tol
    K0 = 64 if table is None else max(64, table.tail_start)
    Kn = Km = 0
    if not minimal:
        if boundary is None:
            boundary = classify_boundary(rates, table=table)
        if boundary.kind not in ("Regular", "Exit"):
            raise InadmissibleTriple(f"boundary is {boundary.kind}; only Regular or Exit admit boundary parameters")
        if check:
            rep = check_admissible(triple, table, boundary, tol=1e-10)
            if not rep.admissible:
                bad = [k for k, ok in rep.clauses.items() if not ok]
                raise InadmissibleTriple(f"triple fails {', '.join(bad)}")
        budget = 2**14
        Kn = _series_depth(triple.nu, table, tol / max(1.0, alpha, f0.sup), K0, budget)
        if triple.beta > 0:
            Km = _mu_depth(table, tol / max(1.0, alpha, f0.sup), K0, budget)
    sol = MinimalSolution(rates, table, alpha, ctrl, f0, probe=max(probe, Kn, Km))
    N = sol.N
    u, v, Rm = sol.u, sol.v, sol.R
    e_w = sol.trunc_err if math.isfinite(sol.trunc_err) else 0.0
    if minimal:
        Lam = 0.0
        D = triple.gamma if triple is not None else 0.0
        num = 0.0
        err = f0.sup * e_w if e_w else sol.rel_change * float(np.max(np.abs(Rm[: probe + 1]), initial=0.0))
    else:
        nu = triple.nu
        maj = table.w_majorant
        nuR, bR, KR = _series(nu, Rm, maj, 2.0 * f0.sup, tol, K0)
        nuV, bV, KV = _series(nu, v, maj, 2.0 * alpha, tol, K0)
        num, D = nuR, triple.gamma + nuV
        mass_used = nu.partial_sum(max(KR, KV) - 1)
        e_n = bR + mass_used * f0.sup * e_w
        e_d = bV + mass_used * alpha * e_w
        if triple.beta > 0:
            k = np.arange(Km)
            mu = table.mu_at(k)
            muu = float(np.sum(mu * u[:Km]))
            muuf = float(np.sum(mu * u[:Km] * f0.values(k)))
            mt = table.mu_tail(Km)
            num += triple.beta * muuf
            D += triple.beta * alpha * muu
            Mk = float(table.M_at(Km - 1))
            e_n += triple.beta * f0.sup * (mt + Mk * alpha * e_w)
            e_d += triple.beta * alpha * (mt + Mk * alpha * e_w)
        if not D > 0:
            raise InadmissibleTriple("denominator gamma + nu(1-u) + beta alpha mu(u) vanishes")
        Lam = num / D
        dLam = (e_n + abs(Lam) * e_d) / max(D - e_d, D * 1e-3)
        err = f0.sup * e_w + dLam + abs(Lam) * alpha * e_w
    values = Rm + u * Lam
    deficit = Lam * v - Rm
    shift = f_cem / alpha
    err += 4 * np.finfo(float).eps * (abs(Lam) + float(np.max(np.abs(values[: probe + 1]), initial=0.0)))
    return ResolventField(
        alpha=alpha,
        values=values + shift,
        value_inf=Lam + shift,
        value_cem=shift,
        truncation_level=N,
        error_bound=float(err),
        deficit=deficit,
        u=u,
        v=v,
        R_min=Rm,
        Lam=Lam,
        D=D,
        numerator=num,
        payload=f0,
        probe=max(probe, Kn, Km),
        gamma=triple.gamma if triple is not None else 0.0,
    )


# -- Doob restart law ------------------------------------------------------------

class PiDistribution:
    """Restart law ``pi(k) = nu_k / (gamma + |nu|)``, ``pi(∂) = gamma / (gamma + |nu|)``."""

    def __init__(self, triple, table_eps=1e-16, kmax=2**20):
        self.triple = triple
        self.nu = triple.nu
        self.total = triple.gamma + triple.nu_mass
        self.p_nu = triple.nu_mass / self.total
        self.p_cem = 1.0 - self.p_nu
        # CDF table covering all but a negligible tail
        K = 64 if self.nu.support_max is None else self.nu.support_max + 1
        while self.nu.support_max is None and K < kmax and self.nu.tail_mass(K) > table_eps * triple.nu_mass:
            K *= 2
        self._cdf = np.cumsum(self.nu.weights(np.arange(K))) / triple.nu_mass
        self._K = K

    def prob(self, k):
        return self.nu.weights(k) / self.total

    def sample(self, u):
        """Map a uniform ``u`` to a state code (``-1`` for the cemetery)."""
        if u < self.p_cem:
            return CEMETERY_CODE
        s = (u - self.p_cem) / self.p_nu if self.p_nu > 0 else 0.0
        s = min(max(s, 0.0), 1.0)
        k = int(np.searchsorted(self._cdf, s, side="left"))
        if k >= self._K:
            return int(self.nu.quantile(s))
        return k

    def cdf_with_cemetery(self):
        """Cumulative restart table ``[pi(∂), pi(∂)+pi(0), ...]`` for vectorised draws."""
        return self.p_cem + self.p_nu * self._cdf


def pi_distribution(triple):
    """Instantaneous restart distribution of a Doob process.

    Raises
    ------
    NotDoob
        Unless ``beta = 0`` and ``0 < |nu| < inf``.
    """
    if not triple.is_doob:
        raise NotDoob(f"need beta = 0 and 0 < |nu| < inf, got beta={triple.beta}, |nu|={triple.nu_mass}")
    return PiDistribution(triple)


# -- generator and boundary condition -------------------------------------------

def apply_Q(rates, F):
    """``QF(k) = a_k F(k-1) - q_k F(k) + b_k F(k+1)`` on ``0..K-1`` from ``F`` on ``0..K``."""
    F = np.asarray(F, dtype=float)
    K = F.size - 1
    if K < 1:
        return np.zeros(0)
    a, b, q = rates.arrays(K - 1)
    Fm = np.concatenate([[0.0], F[: K - 1]])
    return a * Fm - q * F[:K] + b * F[1 : K + 1]


@dataclass(frozen=True)
class ResidualReport:
    value: float
    fplus: float
    fplus_spread: float
    series_value: float
    series_bound: float

    def __float__(self):
        return self.value


def _deficits(F, K):
    """``F(inf) - F(k)`` for ``k < K`` and a bound factor for the tail."""
    if isinstance(F, ResolventField):
        if K > F.deficit.size:
            raise ValueError(f"field only covers states up to {F.deficit.size - 1}")
        return F.deficit[:K], F.value_inf
    k = np.arange(K)
    return F.at_inf - F.values(k), F.at_inf


def boundary_residual_report(rates, table, triple, F, K=64):
    """Evaluate the boundary condition at infinity for ``F`` under ``triple``.

    ``F+(inf)`` is the limit of ``(F(inf) - F(k)) / (c_inf - c_k)``; it is
    estimated at ``2K`` and the difference to the estimate at ``K`` is
    returned as the spread.

    Raises
    ------
    TailUnbounded
        If the nu-series over ``F(inf) - F(k)`` has no certified tail bound.
    """
    nu = triple.nu
    fplus = spread = 0.0
    if triple.beta > 0:
        if not math.isfinite(table.c_inf_estimate):
            raise ValueError("the reflecting term needs a finite c_inf")
        d, _ = _deficits(F, 2 * K + 1)
        g = table.c_gap(np.array([K, 2 * K]))
        est = d[[K, 2 * K]] / g
        fplus, spread = float(est[1]), float(abs(est[1] - est[0]))
    if nu.support_max is not None:
        Kn = nu.support_max + 1
        d, _ = _deficits(F, Kn) if Kn else (np.zeros(0), 0.0)
        sval = float(np.sum(nu.weights(np.arange(Kn)) * d)) if Kn else 0.0
        sbound = 0.0
    elif isinstance(F, ResolventField):
        Kn = F.probe
        maj = [(F.deficit_sup(Kn) * c, r, dd) for c, r, dd in table.w_majorant(Kn)]
        sbound = nu.series_bound(Kn, maj)
        if not math.isfinite(sbound):
            raise TailUnbounded("nu-series over the deficits has no finite bound")
        d, _ = _deficits(F, Kn)
        sval = float(np.sum(nu.weights(np.arange(Kn)) * d))
    elif F.tail_from is not None:
        Kn = F.tail_from
        d, _ = _deficits(F, Kn)
        sval = float(np.sum(nu.weights(np.arange(Kn)) * d)) if Kn else 0.0
        sbound = 0.0
    else:
        raise TailUnbounded("function has no constant tail and nu has unbounded support")
    F_inf = F.value_inf if isinstance(F, ResolventField) else F.at_inf
    value = 0.5 * triple.beta * fplus + sval + triple.gamma * F_inf
    return ResidualReport(value, fplus, spread, sval, sbound)


def boundary_residual(rates, table, triple, F, K=64):
    """``(beta/2) F+(inf) + sum_k (F(inf) - F(k)) nu_k + gamma F(inf)``."""
    return boundary_residual_report(rates, table, triple, F, K).value
