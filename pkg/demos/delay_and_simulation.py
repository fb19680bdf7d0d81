"""Walk through the cluster queue: rates, closed-form delay, and a simulated check.

Run with ``python3 demos/delay_and_simulation.py``.
"""
from d2dcache import (SimConfig, cluster_rates, cooperation_gain, cpf_placement,
                      network_delay, simulate_network, zipf_popularity)
from d2dcache.experiments.config import baseline_params

params = baseline_params()
pop = zipf_popularity(params)
c = cpf_placement(params, pop)

print("Five clusters of five users, 108 files, 20 cached per cluster.\n")
for k, r in enumerate(cluster_rates(c, pop, params), start=1):
    print(f"cluster {k}: local {r.lambda_lc:.3f}  remote {r.lambda_rc:.3f}"
          f"  backhaul {r.lambda_bh:.3f} req/s  load {r.rho:.3f}")

rep = network_delay(c, pop, params)
print(f"\nclosed-form network delay: {rep.network_delay:.4f} s")

sim = simulate_network(c, pop, params, config=SimConfig(100_000, seed=1))
print(f"simulated network delay:   {sim.sim_delay:.4f} s +/- {sim.ci_half_width:.4f}"
      f"  ({100 * sim.relative_error:.2f}% off)")

print("\nCooperation gain as the cluster cache grows:")
for N in (4, 20, 40, 60, 80, 100):
    p = params.evolve(N=N)
    gain, flagged, co, nc = cooperation_gain(cpf_placement(p, pop), pop, p)
    note = "  (non-cooperative queue unstable)" if flagged else ""
    print(f"  N={N:3d}: coop {co.network_delay:.3f} s, without {nc.network_delay:.3f} s,"
          f" gain {gain:.3f}{note}")
