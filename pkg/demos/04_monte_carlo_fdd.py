"""Finite-dimensional distributions of truncated Doob processes against their target.

Every ensemble uses per-path counter-based streams, so the numbers below do
not depend on the worker count.

Run: python demos/04_monte_carlo_fdd.py
"""

from bdp import ParameterTriple, StateFunction, build_measure, geometric_regular, scale_speed
from bdp.mc import dprime_as_convergence_experiment, fdd_convergence_experiment
from bdp.schemes import truncation_scheme

rates = geometric_regular(4.0)
table = scale_speed(rates)
nu = build_measure({"family": "finite", "entries": {k: 0.5**k for k in range(12)}})
target = ParameterTriple(0.0, 0.0, nu)

rep = fdd_convergence_experiment(rates, table, truncation_scheme(target), target, [0.5, 1.0],
                                 [StateFunction.indicator([0, 1]), StateFunction.indicator([0])],
                                 (1, 2, 4, 8), 2000, master_seed=99, horizon=10.0, workers=2)
print(rep.to_csv())
print(rep.verdict_line())

rep = dprime_as_convergence_experiment(rates, table, ParameterTriple(0.0, 0.0, build_measure(
    {"family": "geometric", "C": 1.0, "rho": 0.5})), (2, 4, 8, 16), 200, 10.0, master_seed=2024)
print(rep.to_csv())
print(rep.verdict_line())
