"""Simulate a Doob process, cut out its excursions above n and measure the damage.

Run: python demos/03_paths_and_surgery.py
"""

import numpy as np

from bdp import ParameterTriple, build_measure, geometric_regular, scale_speed
from bdp.metrics import dprime, local_uniform_distance, skorohod_j1_upper
from bdp.pathsim import SimControls, make_rng, simulate_doob, wang_surgery

rates = geometric_regular(4.0)
table = scale_speed(rates)
nu = build_measure({"family": "geometric", "C": 1.0, "rho": 0.5})
target = ParameterTriple(0.0, 0.0, nu)

path = simulate_doob(rates, table, target, 0, SimControls(horizon=10.0), make_rng(4))
print(path)
print("approach times:", np.round(path.events, 3))
print("restart states:", path.states[path.markers])

for n in (0, 1, 2, 4, 8):
    cut = wang_surgery(path, n)
    d, tail = dprime(cut, path)
    T = cut.horizon
    print(f"n={n}: horizon {cut.horizon:.3f}, d' = {d:.4f} (+/- {tail:.0e}), "
          f"J1 bound on [0,{T:.2f}] = {skorohod_j1_upper(cut, path, T):.4f}, "
          f"uniform = {local_uniform_distance(cut, path, T):.4f}")
