"""Swallowtails of the steady-state equation and the threshold quasi-momentum.

    python3 demos/catastrophe.py
"""
from cavityband import butterfly_check, find_q_sw, swallowtail_scan, transversality_rank_check

for q in (0.6, 0.69, 0.8, 0.96):
    for pt in swallowtail_scan(q, n_atoms=100, kappa=1.0):
        bf = butterfly_check(pt)
        print(f"q={q}: v={pt.v:.4f}  Dc/kappa={pt.delta_c_over_kappa:.4f}  eta/kappa={pt.eta:.3f}"
              f"  U0={pt.u0:.4f}  residual4={bf.residual:+.3g}+-{bf.error:.1g} ({bf.verdict})")

pt = swallowtail_scan(0.69, n_atoms=100, kappa=1.0)[1]
print("transversality rank:", transversality_rank_check(pt).rank)
print("threshold q_sw (N=100):", round(find_q_sw(n_atoms=100), 4))
