"""Approximate a reflecting process by Doob processes that jump back from infinity.

The approximating triples put all the boundary mass on a single atom at n.
Their nu(1 - u) does not converge to the target's: the gap tends to
beta * alpha * mu(u), the share the reflecting weight carries.

Run: python demos/02_wang_approximation.py
"""

import numpy as np

from bdp import ParameterTriple, StateFunction, build_measure, geometric_regular, scale_speed, u_min
from bdp.schemes import resolvent_convergence_report, triple_convergence_report, wang_limit_checks, wang_scheme

rates = geometric_regular(4.0)
table = scale_speed(rates)
nu = build_measure({"family": "geometric", "C": 1.0, "rho": 0.5})
target = ParameterTriple(0.0, 1.0, nu)
seq = wang_scheme(rates, table, target)

for n in (2, 4, 8):
    tn = seq(n)
    print(f"n={n}: beta_n={tn.beta}, atom nu_n({n}) = {tn.nu.weights(n):.4f}, |nu_n| = {tn.nu_mass:.4f}")

rep = triple_convergence_report(rates, table, seq, target, n_grid=(8, 16, 24))
u = u_min(rates, table, 1.0)
mu_u = float(np.sum(table.mu_at(np.arange(200)) * u[:200]))
for n, gap, bound, ok in rep.series("nu(1-u)@alpha=1"):
    print(f"n={n:2d}: nu_n(1-u) - nu(1-u) = {gap:.9f}   (beta*alpha*mu(u) = {mu_u:.9f})")

# The resolvents still converge.
rr = resolvent_convergence_report(rates, table, seq, target, 1.0, StateFunction.indicator([0]),
                                  n_grid=(4, 8, 16, 24))
for n, gap, bound, ok in rr.series("sup_k<=32|Rn f-R f|"):
    print(f"n={n:2d}: sup_k |R_n f - R f| = {gap:.2e}")

print(wang_limit_checks(rates, table).to_csv())
