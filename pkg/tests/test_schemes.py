"""Approximating triples, convergence reports, Wang limits and the projection step."""

import math

import numpy as np
import pytest

from bdp.errors import CInfUnavailable, ZeroDenominator
from bdp.functions import StateFunction
from bdp.measures import build_measure
from bdp.resolvent import boundary_residual, full_resolvent_field, minimal_solution
from bdp.scale import classify_boundary
from bdp.schemes import (
    GapReport,
    constant_scheme,
    project_to_Cn,
    resolvent_convergence_report,
    tailshift_triple,
    triple_convergence_report,
    truncate_triple,
    truncation_scheme,
    wang_limit_checks,
    wang_scheme,
    wang_triple,
)
from bdp.triple import check_admissible

from conftest import geo_nu, triple

F0 = StateFunction.indicator([0])
POWER = build_measure({"family": "power", "C": 1.0, "p": 0.5})  # infinite mass


def test_truncate_examples():
    t1 = truncate_triple(triple(0.0, 0.0, geo_nu()), 1)
    assert np.array_equal(t1.nu.weights(np.arange(4)), [1.0, 0.5, 0.0, 0.0])
    assert t1.nu_mass == 1.5
    zero_at_0 = build_measure({"family": "finite", "entries": {2: 1.0}})
    assert truncate_triple(triple(0.0, 1.0, zero_at_0), 0).nu_mass == 0.0
    prev = np.zeros(10)
    for n in range(12):
        w = truncate_triple(triple(0.0, 0.0, geo_nu()), n).nu.weights(np.arange(10))
        assert np.all(w >= prev)
        prev = w
    assert np.array_equal(prev, geo_nu().weights(np.arange(10)))


def test_tailshift_examples():
    t0 = tailshift_triple(triple(0.0, 0.0, geo_nu()), 0)
    assert t0.nu.weights(0) == 0.0 and t0.nu.weights(3) == 0.125
    assert tailshift_triple(triple(0.0, 0.0, POWER), 7).nu_mass == math.inf


def test_wang_triple_reflecting_atom(reg):
    r, t = reg
    for n in range(1, 12):
        tn = wang_triple(r, t, triple(0.0, 2.0), n)
        assert tn.beta == 0.0 and tn.is_doob
        assert tn.nu.weights(n) == pytest.approx(2.0**n, rel=1e-12)
        assert tn.nu_mass == pytest.approx(2.0**n, rel=1e-12)


def test_wang_identity_on_short_support(reg):
    r, t = reg
    nu = build_measure({"family": "finite", "entries": {0: 0.5, 2: 0.25}})
    tn = wang_triple(r, t, triple(0.3, 0.0, nu), 5)
    assert np.array_equal(tn.nu.weights(np.arange(8)), nu.weights(np.arange(8)))
    assert tn.gamma == 0.3


def test_wang_triple_against_direct_sum(reg):
    r, t = reg
    n = 4
    tn = wang_triple(r, t, triple(0.0, 1.0, geo_nu()), n)
    # c_inf - c_k = 2^-k on this family
    k = np.arange(n, 400)
    direct = (0.5 + float(np.sum(0.5**k * 0.5**k))) / 0.5**n
    assert tn.nu.weights(n) == pytest.approx(direct, rel=1e-13)


def test_scheme_outputs_admissible(reg):
    r, t = reg
    bc = classify_boundary(r, table=t)
    for target in (triple(0.0, 0.0, geo_nu()), triple(0.5, 1.0, geo_nu()), triple(1.0, 0.0, POWER)):
        for n in (1, 4, 16):
            assert check_admissible(truncate_triple(target, n), t, bc).admissible
            assert check_admissible(wang_triple(r, t, target, n), t, bc).admissible


def test_wang_needs_finite_c_inf(lin):
    with pytest.raises(CInfUnavailable):
        wang_triple(lin[0], lin[1], triple(0.0, 1.0), 3)


def test_truncation_scheme_passes_clauses(reg):
    r, t = reg
    target = triple(0.5, 0.0, geo_nu())
    rep = triple_convergence_report(r, t, truncation_scheme(target), target, alphas=(0.5, 1.0, 2.0))
    assert rep.passed
    gaps = [abs(v) for _, v, _, _ in rep.series("nu(1-u)@alpha=1")]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_wang_beta0_passes_clauses(reg):
    r, t = reg
    target = triple(0.0, 0.0, geo_nu())
    rep = triple_convergence_report(r, t, wang_scheme(r, t, target), target, n_grid=(8, 16, 24, 32))
    assert rep.passed


def test_wang_reflecting_fails_signed_clause(reg):
    r, t = reg
    target = triple(0.0, 1.0, geo_nu())
    rep = triple_convergence_report(r, t, wang_scheme(r, t, target), target, n_grid=(8, 16, 24))
    cp = rep.clause_pass()
    assert cp["nu(1-u)@alpha=1"] is False
    assert cp["beta"] is False and cp["gamma"] is True


def test_constant_scheme_zero_gaps(reg):
    r, t = reg
    target = triple(0.0, 1.0, geo_nu())
    rep = triple_convergence_report(r, t, constant_scheme(target), target)
    assert all(v == 0.0 for _, _, v, _, _ in rep.rows)
    rr = resolvent_convergence_report(r, t, constant_scheme(target), target, 1.0, F0, n_grid=(2, 4))
    assert all(v == 0.0 for _, q, v, _, _ in rr.rows if not q.startswith("trend"))


def test_resolvent_gaps_truncation(reg):
    r, t = reg
    target = triple(0.0, 0.0, geo_nu())
    rep = resolvent_convergence_report(r, t, truncation_scheme(target), target, 1.0, F0)
    sup = [v for _, v, _, _ in rep.series("sup_k<=32|Rn f-R f|")]
    assert all(b <= a for a, b in zip(sup, sup[1:]))
    assert sup[-1] < 1e-6
    assert rep.passed


def test_wang_reflecting_resolvent_gaps_shrink(reg):
    r, t = reg
    target = triple(0.0, 1.0, geo_nu())
    rep = resolvent_convergence_report(r, t, wang_scheme(r, t, target), target, 1.0, F0, n_grid=(4, 8, 16, 24))
    sup = [v for _, v, _, _ in rep.series("sup_k<=32|Rn f-R f|")]
    assert all(b < a for a, b in zip(sup, sup[1:]))
    assert sup[-1] < 1e-6


def test_gap_report_csv_roundtrip():
    rep = GapReport()
    rep.add(2, "gamma", 0.1, 0.0, True)
    rep.add(4, "raw", 1 / 3, 1e-17, None)
    back = GapReport.from_csv(rep.to_csv())
    assert back.rows == rep.rows


def test_wang_limit_checks_regular(reg):
    r, t = reg
    rep = wang_limit_checks(r, t, n_grid=(8, 16, 24))
    for q in ("ratio1_relgap@alpha=1,k=0", "ratio2_relgap@alpha=1"):
        s = rep.series(q)
        assert s[-1][1] < 0.05
        assert all(b[1] < a[1] for a, b in zip(s, s[1:]))
    assert all(v > 0 for _, v, _, _ in rep.series("ratio1_raw@alpha=1,k=0"))


def test_wang_limit_checks_exit_raw_only(exitr):
    r, t = exitr
    rep = wang_limit_checks(r, t, n_grid=(4, 8))
    assert "ratio2_relgap@alpha=1" not in rep.quantities()
    assert all(ok is None for *_, ok in rep.series("ratio2_raw@alpha=1"))


def test_projection_examples(reg):
    r, t = reg
    d0 = build_measure({"family": "finite", "entries": {0: 1.0}})
    tn = triple(1.0, 0.0, d0)
    gn = project_to_Cn(r, t, tn, StateFunction.constant(1.0))
    assert gn.chi == 1.0 and gn.values(0) == 2.0 and gn.support_depth == 0
    assert boundary_residual(r, t, tn, gn) == pytest.approx(0.0, abs=1e-15)
    # g already in the domain: unchanged
    g = StateFunction.from_array([0.0], tail=0.0)
    gz = project_to_Cn(r, t, triple(0.0, 0.0, d0), g)
    assert gz.chi == 0.0
    with pytest.raises(ZeroDenominator):
        project_to_Cn(r, t, triple(1.0, 0.0, build_measure({"family": "finite", "entries": {3: 1.0}})),
                      StateFunction.constant(1.0), N=2)


def test_projection_along_wang(reg):
    r, t = reg
    target = triple(0.0, 1.0, geo_nu())
    F = full_resolvent_field(r, t, target, 1.0, F0, probe=129)
    chis = []
    for n in (4, 8, 16, 24):
        tn = wang_triple(r, t, target, n)
        gn = project_to_Cn(r, t, tn, F)
        # rounding relative to the atom weight, which grows like 2^n
        assert abs(boundary_residual(r, t, tn, gn)) < 1e-14 * tn.nu_mass * gn.sup + 1e-15
        chis.append(abs(gn.chi))
    assert all(b < a for a, b in zip(chis, chis[1:]))
    assert chis[-1] < 1e-5
