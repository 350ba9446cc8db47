"""Classify the boundary at infinity and build resolvents of processes that use it.

Run: python demos/01_boundary_and_resolvent.py
"""

import numpy as np

from bdp import (
    ParameterTriple,
    StateFunction,
    boundary_residual,
    build_measure,
    classify_boundary,
    full_resolvent_field,
    geometric_exit,
    geometric_regular,
    linear,
    scale_speed,
)

# Three rate families with the three boundary behaviours that matter here.
for rates in (geometric_regular(4.0), geometric_exit(2.0), linear()):
    bc = classify_boundary(rates)
    print(f"{rates.family:18s} -> {bc.kind:8s} R={bc.R_value:.6g} S={bc.S_value:.6g}")

# On the regular family every admissible (gamma, beta, nu) gives a different process.
rates = geometric_regular(4.0)
table = scale_speed(rates)
f = StateFunction.indicator([0])
nu = build_measure({"family": "geometric", "C": 1.0, "rho": 0.5})
for triple in (ParameterTriple(1.0, 0.0), ParameterTriple(0.0, 1.0), ParameterTriple(0.0, 0.0, nu),
               ParameterTriple(0.5, 1.0, nu)):
    F = full_resolvent_field(rates, table, triple, 1.0, f, probe=129)
    res = boundary_residual(rates, table, triple, F)
    print(f"{triple!r}\n    R f(0..3) = {np.round(F.values[:4], 6)}  R f(inf) = {F.value_inf:.6f}"
          f"  boundary residual = {res:.1e}")
