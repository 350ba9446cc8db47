"""Ensembles, fdd estimates and the two convergence experiments."""

import math

import numpy as np
import pytest

from bdp.errors import HorizonExceeded
from bdp.functions import StateFunction
from bdp.mc import (
    ConvergenceReport,
    _judge,
    _median_ci,
    doob_generator,
    dprime_as_convergence_experiment,
    empirical_fdd,
    fdd_convergence_experiment,
    run_ensemble,
    split_seed,
)
from bdp.measures import build_measure
from bdp.pathsim import SimControls, make_rng, simulate_doob, simulate_minimal
from bdp.resolvent import full_resolvent_field
from bdp.schemes import constant_scheme, truncation_scheme, wang_scheme
from bdp.semigroup import stehfest_invert

from conftest import geo_nu, triple

DELTA0 = build_measure({"family": "finite", "entries": {0: 1.0}})
F0 = StateFunction.indicator([0])


def test_split_seed_pure():
    assert split_seed(7, 3) == split_seed(7, 3)
    assert len({split_seed(7, i) for i in range(1000)}) == 1000


def test_count_one_matches_direct_call(reg):
    r, t = reg
    ctrl = SimControls(horizon=5.0)
    gen = doob_generator(r, t, triple(0.0, 0.0, geo_nu()), 0, ctrl)
    ens = run_ensemble(gen, 1, 42)
    direct = simulate_doob(r, t, triple(0.0, 0.0, geo_nu()), 0, ctrl, make_rng(split_seed(42, 0)))
    assert ens.paths[0] == direct


def test_ensemble_deterministic_across_workers(reg):
    r, t = reg
    gen = doob_generator(r, t, triple(0.0, 0.0, geo_nu()), 0, SimControls(horizon=5.0))
    a = run_ensemble(gen, 40, 9)
    b = run_ensemble(gen, 40, 9, workers=4)
    assert all(x == y for x, y in zip(a.paths, b.paths))


def test_master_seeds_differ(reg):
    r, t = reg
    ctrl = SimControls(horizon=5.0)
    diff = 0
    for m in range(100):
        p = simulate_minimal(r, t, 0, ctrl, make_rng(split_seed(m, 0)))
        q = simulate_minimal(r, t, 0, ctrl, make_rng(split_seed(m + 1000, 0)))
        diff += p.times[1] != q.times[1]
    assert diff / 100 > 0.99


def test_ensemble_error_carries_index(reg):
    def gen(seed):
        if seed == split_seed(1, 2):
            raise ValueError("boom")
        return seed

    with pytest.raises(ValueError) as ei:
        run_ensemble(gen, 5, 1)
    assert ei.value.path_index == 2


def test_fdd_trivial_estimates(reg):
    r, t = reg
    gen = doob_generator(r, t, triple(0.0, 0.0, geo_nu()), 3, SimControls(horizon=2.0))
    ens = run_ensemble(gen, 50, 0)
    one = StateFunction.constant(1.0)
    e = empirical_fdd(ens, [0.5, 1.0], [one, one])
    assert e.estimate == 1.0 and e.halfwidth == 0.0
    e = empirical_fdd(ens, [0.0], [StateFunction.indicator([3])])
    assert e.estimate == 1.0
    with pytest.raises(HorizonExceeded):
        empirical_fdd(ens, [3.0], [one])


def test_fdd_against_laplace_inversion(reg):
    r, t = reg
    trip, tt = triple(0.0, 0.0, DELTA0), 0.3
    gen = doob_generator(r, t, trip, 0, SimControls(horizon=1.0))
    est = empirical_fdd(run_ensemble(gen, 4000, 5), [tt], [F0])
    p_hat, _ = stehfest_invert(lambda s: full_resolvent_field(r, t, trip, s, F0)(0), tt, 12)
    assert abs(est.estimate - p_hat) <= est.halfwidth + 1e-3
    assert p_hat > math.exp(-float(r.q(0)) * tt)


def test_judge_rules():
    assert _judge(0.005, 0.001)[0] is True
    assert _judge(0.05, 0.001)[0] is False
    assert _judge(0.025, 0.01)[0] == "inconclusive"


def test_median_ci_contains_median():
    x = np.random.default_rng(0).exponential(size=501)
    med, hw, lo, hi = _median_ci(x)
    assert lo <= med <= hi and hw > 0


def test_report_csv_roundtrip():
    rep = ConvergenceReport(title="x")
    rep.add(2, "a", 0.5, 0.1, True)
    rep.add(4, "b", 1 / 3, 0.0, "inconclusive")
    rep.add(4, "c", 0.0, 0.0)
    assert ConvergenceReport.from_csv(rep.to_csv()).rows == rep.rows
    assert rep.verdict == "Inconclusive"
    rep.add(8, "d", 0, 0, False)
    assert rep.verdict == "Fail"


def test_dprime_experiment_degenerate(reg):
    r, t = reg
    # from far below the cap with a tiny horizon no approach happens, so surgery is the identity
    rep = dprime_as_convergence_experiment(r, t, triple(0.0, 0.0, geo_nu()), (2, 4), 30, 1e-3, 1)
    assert all(v == 0.0 for _, v, _, _ in rep.series("median_dprime"))
    assert rep.verdict == "Pass"


@pytest.mark.slow
def test_dprime_experiment_small(reg):
    r, t = reg
    rep = dprime_as_convergence_experiment(r, t, triple(0.0, 0.0, geo_nu()), (2, 4, 8, 16), 60, 10.0, 3)
    med = [v for _, v, _, _ in rep.series("median_dprime")]
    assert all(b <= a for a, b in zip(med, med[1:]))


def test_fdd_constant_scheme_passes(reg):
    r, t = reg
    target = triple(0.0, 0.0, geo_nu())
    rep = fdd_convergence_experiment(r, t, constant_scheme(target), target, [0.5, 1.0], [F0, F0],
                                     (4, 8), 1000, 17)
    assert rep.verdict == "Pass"


def test_fdd_wang_reflecting_successive(reg):
    r, t = reg
    target = triple(0.0, 1.0)
    # the approximants restart at level n and re-approach quickly; the event rate grows like 4^n
    rep = fdd_convergence_experiment(r, t, wang_scheme(r, t, target), target, [1.0], [F0], (2, 4, 8), 600, 4)
    assert rep.series("successive_gap") and not rep.series("target_fdd")
    assert rep.verdict in ("Pass", "Inconclusive")
