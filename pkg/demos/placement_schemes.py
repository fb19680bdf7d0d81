"""Compare popular-file, greedy and random caching across popularity skew.

Run with ``python3 demos/placement_schemes.py``.
"""
import numpy as np

from d2dcache import (Objective, brute_force_optimal, cpf_placement, greedy_caching,
                      network_delay, network_per_request_throughput, random_placement,
                      reduction_ratio, zipf_popularity)
from d2dcache.experiments.config import baseline_params

# slower D2D and cellular links, faster backhaul
base = baseline_params(comparison_rates=True)

print(" beta    GCA delay   CPF delay   RC delay (mean of 20)   CPF throughput")
for beta in (0.0, 0.5, 1.0, 1.5):
    p = base.evolve(beta=beta)
    pop = zipf_popularity(p)
    gca = greedy_caching(p, pop).final_placement
    d = lambda c: network_delay(c, pop, p).network_delay  # noqa: E731
    rc = np.mean([d(random_placement(p, s)) for s in range(20)])
    thr = network_per_request_throughput(cpf_placement(p, pop), pop, p)
    print(f" {beta:4.2f}   {d(gca):9.4f}   {d(cpf_placement(p, pop)):9.4f}   {rc:9.4f}"
          f"               {thr / 1e6:7.3f} Mbps")

print("\nGreedy vs exhaustive search on a toy instance (2 clusters, 6 files, 2 slots):")
toy = baseline_params(True, K=2, n=4, M=1, m=6, m0=3, n_cache=2, beta=0.5)
pop = zipf_popularity(toy)
trace = greedy_caching(toy, pop, Objective.AVG_DOWNLOAD_TIME)
for i, s in enumerate(trace.steps, start=1):
    print(f"  step {i}: cluster {s.cluster} caches file {s.file} (saves {1e3 * s.marginal:.2f} ms)")
opt, _ = brute_force_optimal(toy, pop, Objective.AVG_DOWNLOAD_TIME)
ratio = reduction_ratio(toy, pop, trace.final_placement, opt, Objective.AVG_DOWNLOAD_TIME)
print(f"  greedy achieves {ratio:.3f} of the optimal reduction")
