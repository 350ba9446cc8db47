"""Monte-Carlo ensembles and statistical convergence experiments.

Every path gets its own counter-based stream derived from the master seed and
the path index, so ensembles do not depend on the number of worker threads.
Reductions always run in path-index order.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from .errors import HorizonExceeded
from .functions import StateFunction
from .metrics import dprime
from .pathsim import SimControls, make_rng, simulate_doob, wang_surgery, _prepare, _run
from .resolvent import DEFAULT_CONTROLS, full_resolvent_field, pi_distribution

__all__ = [
    "Z99",
    "split_seed",
    "Ensemble",
    "run_ensemble",
    "FddEstimate",
    "empirical_fdd",
    "ConvergenceReport",
    "dprime_as_convergence_experiment",
    "fdd_convergence_experiment",
    "doob_generator",
]

Z99 = 2.5758293035489004  # two-sided 99% normal quantile
GAP_FLOOR = 1e-2
PASS, FAIL, INCONCLUSIVE = "Pass", "Fail", "Inconclusive"


def split_seed(master_seed, index):
    """64-bit seed of path ``index``; a pure function of ``(master_seed, index)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class Ensemble:
    paths: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.paths)

    @property
    def seeds(self):
        return self.meta.get("seeds", [])


def run_ensemble(generator, count, master_seed, workers=1, meta=None):
    """Simulate ``count`` paths, path ``i`` with ``generator(split_seed(master_seed, i))``.

    Errors raised by the generator carry the failing index as ``path_index``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    seeds = [split_seed(master_seed, i) for i in range(count)]

    def one(i):
        try:
            return generator(seeds[i])
        except Exception as exc:
            exc.path_index = i
            if getattr(exc, "index", i) is None:
                exc.index = i
            raise

    if workers <= 1:
        paths = [one(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(one, range(count)))
    info = dict(meta or {})
    info.update(master_seed=int(master_seed), seeds=seeds, count=count)
    return Ensemble(paths, info)


def doob_generator(rates, table, triple, i0, ctrl):
    """Seed -> Doob path closure, with the restart law and level arrays built once."""
    pi = pi_distribution(triple)
    cdf = np.concatenate([[pi.p_cem], pi.cdf_with_cemetery()])
    cap, b, q, resid = _prepare(rates, table, ctrl, max(int(i0), cdf.size))

    def gen(seed):
        return _run(make_rng(seed), int(i0), ctrl, cap, b, q, resid, cdf, True)

    return gen


# -- fdd estimation ---------------------------------------------------------------

@dataclass
class FddEstimate:
    estimate: float
    halfwidth: float
    std: float
    count: int
    samples: np.ndarray = field(repr=False, default=None)


def _as_fn(f):
    if isinstance(f, StateFunction):
        return f
    return lambda codes: np.asarray(f(codes), dtype=float)


def fdd_samples(ensemble, times, test_fns):
    """Per-path products ``prod_m f_m(X_{t_m})``."""
    times = np.asarray(times, dtype=float)
    if len(test_fns) != times.size:
        raise ValueError("one test function per time is required")
    if times.size and (times[0] < 0 or np.any(np.diff(times) <= 0)):
        raise ValueError("times must be increasing from 0")
    fns = [_as_fn(f) for f in test_fns]
    out = np.empty(len(ensemble.paths))
    for i, p in enumerate(ensemble.paths):
        if times.size and times[-1] > p.horizon:
            raise HorizonExceeded(f"time {times[-1]} beyond horizon {p.horizon} of path {i}")
        codes = p.eval(times)
        v = 1.0
        for f, c in zip(fns, codes):
            v *= float(f(np.asarray([c]))[0])
        out[i] = v
    return out


def _ci(x):
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return float(np.mean(x)), Z99 * sd / math.sqrt(n), sd


def empirical_fdd(ensemble, times, test_fns):
    """Sample mean of ``prod_m f_m(X_{t_m})`` with a normal 99% half-width."""
    x = fdd_samples(ensemble, times, test_fns)
    m, h, sd = _ci(x)
    return FddEstimate(m, h, sd, x.size, x)


# -- reports ----------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    """Rows ``(n, statistic, estimate, halfwidth, pass)``.

    ``pass`` is True, False, ``"inconclusive"`` or None (informational row).
    """

    rows: list = field(default_factory=list)
    title: str = ""

    def add(self, n, stat, est, hw, ok=None):
        self.rows.append((int(n), str(stat), float(est), float(hw), ok))

    @property
    def verdict(self):
        flags = [r[4] for r in self.rows if r[4] is not None]
        if any(f is False for f in flags):
            return FAIL
        if any(f == "inconclusive" for f in flags):
            return INCONCLUSIVE
        return PASS

    def verdict_line(self):
        return f"verdict: {self.verdict}" + (f" ({self.title})" if self.title else "")

    def series(self, stat):
        return [(r[0], r[2], r[3], r[4]) for r in self.rows if r[1] == stat]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "statistic", "estimate", "halfwidth", "pass"])
        for n, s, e, h, ok in self.rows:
            flag = "" if ok is None else (ok if isinstance(ok, str) else str(bool(ok)).lower())
            w.writerow([n, s, repr(e), repr(h), flag])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rd = csv.reader(io.StringIO(text))
        if next(rd) != ["n", "statistic", "estimate", "halfwidth", "pass"]:
            raise ValueError("unexpected report header")
        rep = cls()
        conv = {"": None, "true": True, "false": False, "inconclusive": "inconclusive"}
        for n, s, e, h, ok in rd:
            rep.rows.append((int(n), s, float(e), float(h), conv[ok]))
        return rep


def _judge(gap, hw, floor=GAP_FLOOR):
    """Pass below ``max(2 hw, floor)``, fail when even ``|gap| - hw`` is above it."""
    tau = max(2.0 * hw, floor)
    if abs(gap) <= tau:
        return True, tau
    if abs(gap) - hw > tau:
        return False, tau
    return "inconclusive", tau


def _median_ci(x):
    """Distribution-free 99% interval for the median from order statistics."""
    s = np.sort(x)
    n = s.size
    med = float(np.median(s))
    d = int(math.ceil(Z99 * math.sqrt(n) / 2.0))
    lo = s[max(n // 2 - d, 0)]
    hi = s[min((n - 1) // 2 + d, n - 1)]
    return med, float(max(med - lo, hi - med)), float(lo), float(hi)


def dprime_as_convergence_experiment(rates, table, doob_target, n_grid, count, horizon, master_seed,
                                     i0=0, cap=256, Jmax=40, threshold=0.02, workers=1,
                                     max_events=10**6):
    """Distances between simulated target paths and their surgered versions.

    For each ``n`` the median and 90th percentile of ``d'(surgery(X, n), X)``
    are reported.  Asserted: medians nonincreasing in ``n`` and the final
    median below ``threshold`` (its 99% order-statistic interval decides
    between Fail and Inconclusive).
    """
    ctrl = SimControls(cap=cap, horizon=horizon, max_events=max_events)
    gen = doob_generator(rates, table, doob_target, i0, ctrl)
    ens = run_ensemble(gen, count, master_seed, workers,
                       meta={"scheme": "surgery", "triple": doob_target.descriptor,
                             "rates": rates.descriptor})
    rep = ConvergenceReport(title="d' surgery experiment")
    medians = []
    for n in n_grid:
        d = np.array([dprime(wang_surgery(p, n), p, Jmax)[0] for p in ens.paths])
        med, hw, lo, hi = _median_ci(d)
        rep.add(n, "median_dprime", med, hw)
        rep.add(n, "p90_dprime", float(np.quantile(d, 0.9)), 0.0)
        medians.append((n, med, lo, hi))
    mono = all(b[1] <= a[1] + 1e-15 for a, b in zip(medians, medians[1:]))
    rep.add(n_grid[-1], "medians_nonincreasing", float(mono), 0.0, mono)
    n, med, lo, hi = medians[-1]
    ok = True if hi < threshold else (False if lo >= threshold else "inconclusive")
    rep.add(n, f"final_median<{threshold:g}", med, hi - med, ok)
    return rep


def _ensemble_for(rates, table, triple, i0, ctrl, count, seed, workers, label):
    gen = doob_generator(rates, table, triple, i0, ctrl)
    return run_ensemble(gen, count, seed, workers, meta={"scheme": label, "triple": triple.descriptor,
                                                          "rates": rates.descriptor})


def _smoothed(ensemble, f, alpha):
    """Per-path ``alpha int_0^inf e^{-alpha t} f(X_t) dt`` (last state held past the horizon)."""
    out = np.empty(len(ensemble.paths))
    for i, p in enumerate(ensemble.paths):
        edges = np.append(p.times, np.inf)
        w = np.exp(-alpha * edges[:-1]) - np.exp(-alpha * edges[1:])
        out[i] = float(np.dot(w, f(p.states)))
    return out


def fdd_convergence_experiment(rates, table, scheme, target, times, test_fns, n_grid, count, master_seed,
                               i0=0, cap=256, horizon=None, workers=1, alpha=1.0, max_events=10**6,
                               ctrl=DEFAULT_CONTROLS):
    """Finite-dimensional distributions of a scheme along ``n_grid``.

    All scheme ensembles share the master seed (common random numbers), so
    successive-``n`` differences are paired.  If the target is a Doob
    triple it is simulated with an independent stream and the gap
    ``e_n - e_target`` is judged against ``max(2 hw, 0.01)``; otherwise
    successive differences ``e_n - e_{n_prev}`` are judged the same way.
    The ``alpha``-smoothed statistic of the first test function at the
    largest ``n`` is compared with ``alpha R_alpha f(i0)`` for the target.
    """
    times = np.asarray(times, dtype=float)
    horizon = float(horizon if horizon is not None else max(times[-1], 1e-12) * (1 + 1e-9))
    sim = SimControls(cap=cap, horizon=horizon, max_events=max_events)
    rep = ConvergenceReport(title="fdd convergence")
    direct = target.is_doob
    ref = None
    if direct:
        ens_t = _ensemble_for(rates, table, target, i0, sim, count, split_seed(master_seed, 2**32),
                              workers, "target")
        ref = fdd_samples(ens_t, times, test_fns)
        m, h, _ = _ci(ref)
        rep.add(0, "target_fdd", m, h)
    prev = None
    gaps = []
    last_ens = None
    for n in n_grid:
        ens = _ensemble_for(rates, table, scheme(n), i0, sim, count, master_seed, workers, f"n={n}")
        x = fdd_samples(ens, times, test_fns)
        m, h, _ = _ci(x)
        rep.add(n, "fdd", m, h)
        if direct:
            gap = m - float(np.mean(ref))
            hw = Z99 * math.sqrt(np.var(x, ddof=1) / x.size + np.var(ref, ddof=1) / ref.size) if x.size > 1 else 0.0
            gaps.append((n, gap, hw))
            rep.add(n, "gap_to_target", gap, hw)
        elif prev is not None:
            d = x - prev
            gap, hw, _ = _ci(d)
            gaps.append((n, gap, hw))
            rep.add(n, "successive_gap", gap, hw)
        prev = x
        last_ens = ens
    if gaps:
        n_last, g_last, h_last = gaps[-1]
        ok, tau = _judge(g_last, h_last)
        rep.add(n_last, "final_gap_within_threshold", abs(g_last), tau, ok)
        g_first, h_first = abs(gaps[0][1]), gaps[0][2]
        shrink = abs(g_last) <= g_first + max(h_last, h_first, 1e-15)
        rep.add(n_last, "gaps_shrink", float(shrink), 0.0, shrink)
    f0 = _as_fn(test_fns[0])
    F = full_resolvent_field(rates, table, target, alpha, f0 if isinstance(f0, StateFunction) else
                             StateFunction.constant(1.0), ctrl)
    if isinstance(f0, StateFunction):
        pred = alpha * F(int(i0))
        s = _smoothed(last_ens, f0, alpha)
        m, h, _ = _ci(s)
        bias = math.exp(-alpha * horizon) * 2.0 * f0.sup + 2.0 * alpha * F.error_bound
        ok, tau = _judge(m - pred, h + bias)
        if bias > GAP_FLOOR:
            ok = None  # horizon too short for the comparison to mean anything
        rep.add(n_grid[-1], "smoothed_vs_resolvent", m - pred, h + bias, ok)
    return rep
