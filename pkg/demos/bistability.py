"""Onset of optical bistability and the solution-count map near the zone centre.

    python3 demos/bistability.py
"""
import numpy as np

from cavityband import (
    SystemParams,
    bifurcation_map,
    critical_point_numeric,
    eta_cr_analytic_shallow,
    eta_window,
    kerr_critical_point,
)

p = SystemParams(kappa=350.0, n_atoms=1e4, u0=1.0, eta=0.0, delta_c=0.0)

cp = critical_point_numeric(0.0, p, (3000.0, 6000.0))
d0, e0, n0 = kerr_critical_point(p)
print(f"numeric onset:   delta_0={cp.delta_0:.1f}  eta_cr={cp.eta_cr:.2f}  n_0={cp.n_0:.4f}")
print(f"Kerr closed form: delta_0={d0:.1f}  eta_cr={e0:.2f}  n_0={n0:.4f}")

for q in (0.0, 0.25, 0.5):
    e = critical_point_numeric(q, p, (3000.0, 6000.0)).eta_cr
    print(f"q={q}: eta_cr={e:.2f}  shallow law {eta_cr_analytic_shallow(q, p):.2f}")

print("eta window at delta_c=1500:", eta_window(0.0, 1500.0, p))
print("eta windows at q=0.95, delta_c=1630:", eta_window(0.95, 1630.0, p))

m = bifurcation_map(0.95, p, np.linspace(1000, 2500, 61), np.linspace(700, 1300, 61))
print("q=0.95 map: counts", sorted(set(np.unique(m.counts).tolist())), " cusps", m.cusps)
