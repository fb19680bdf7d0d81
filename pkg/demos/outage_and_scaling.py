"""Outage against cluster size, and how the throughput bound decays with library size.

Run with ``python3 demos/outage_and_scaling.py``.
"""
import numpy as np

from d2dcache import (outage_approx, outage_exact, scaling_bound, scaling_exponent,
                      throughput_vs_cluster_size)
from d2dcache.experiments.config import baseline_params

print("120 users with one cached file each, regrouped into clusters of y users:")
print("   y   outage (coop)   outage (alone)   approx (coop)")
for y in (1, 2, 5, 10, 20, 40, 60):
    p = baseline_params(n=120, K=120 // y, m=108, m0=60, M=1, beta=0.5).evolve(N=None, y=y)
    ex, ap = outage_exact(p), outage_approx(p)
    print(f" {y:3d}   {ex.p_outage_coop:13.4f}   {ex.p_outage_noncoop:14.4f}   {ap.p_outage_coop:13.4f}")

print("\nDecay of the dominant throughput term with library size m:")
for beta in (0.2, 0.5, 0.8):
    p = baseline_params(n=10_000, K=100, m=1000, m0=200, M=1, beta=beta).evolve(N=None, y=100)
    rep = scaling_bound(p)
    print(f"  beta {beta}: fitted slope {rep.loglog_slope:+.3f}, exponent {-scaling_exponent(beta):+.3f}")

print("\nBest cluster size for 10,000 users and 1,000 files:")
ys = [1, 2, 4, 5, 8, 10, 16, 20, 25, 40, 50, 80, 100, 200, 500]
for beta in (0.2, 0.5, 0.8):
    p = baseline_params(n=10_000, K=100, m=1000, m0=200, M=1, beta=beta).evolve(N=None, y=100)
    curve = throughput_vs_cluster_size(p, ys)
    best = int(np.argmax(curve.t_sum_bound))
    print(f"  beta {beta}: y = {curve.argmax_y:g}, bound {curve.t_sum_bound[best] / 1e9:.2f} Gbps")
