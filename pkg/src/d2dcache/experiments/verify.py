"""One-shot runner for the oracle and property checks.

Each check returns a :class:`CheckResult` with its measured values; the
suite passes only if every check does. Informational entries (such as the
delay-objective supermodularity count) never fail the suite.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from ..core import SystemParams, zipf_popularity
from ..delay import cluster_delay, pollaczek_khinchine_delay
from ..placement import (
    Objective,
    brute_force_optimal,
    cpf_placement,
    greedy_caching,
    matroid_check,
    monotonicity_check,
    reduction_ratio,
    supermodularity_check,
)
from ..queuesim import SimConfig, geometric_fit, simulate_cluster
from ..rates import ClusterRates, cluster_rates
from ..throughput import outage_exact, throughput_report
from .config import baseline_params

__all__ = [
    "CheckResult",
    "SuiteReport",
    "GREEDY_BOUND",
    "golden_instances",
    "check_matroid",
    "check_supermodularity",
    "check_pk_identity",
    "check_mm1_reduction",
    "check_greedy_ratio",
    "check_geometric_fit",
    "check_outage_crosscheck",
    "load_point",
    "verify_suite",
]

GREEDY_BOUND = 1.0 - math.exp(-1.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    informational: bool = False

    def line(self) -> str:
        status = "INFO" if self.informational else ("PASS" if self.passed else "FAIL")
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.name}: {vals}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class SuiteReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [asdict(c) for c in self.checks]},
                          indent=2, sort_keys=True, default=float)


def golden_instances() -> list[SystemParams]:
    """Small instances (K <= 3, m <= 8, N <= 3) that brute force solves quickly.

    Uses the comparison rates so the delay objective is stable at the empty
    placement for most instances.
    """
    shapes = [(1, 6, 2), (2, 4, 1), (2, 5, 2), (2, 6, 2), (2, 6, 3), (3, 4, 1), (3, 5, 2),
              (2, 8, 2)]
    out = []
    for beta in (0.0, 0.5, 1.2):
        for K, m, N in shapes:
            out.append(baseline_params(True, K=K, n=K * N, M=1, m=m, m0=m // 2, n_cache=N,
                                       beta=beta))
    return out


def check_matroid(K: int = 2, m: int = 4, N: int = 2) -> CheckResult:
    rep = matroid_check(K, m, N)
    return CheckResult("matroid", rep.ok, {"K": K, "m": m, "N": N,
                                           "independent_sets": rep.independent_sets,
                                           "downward_closed": rep.downward_closed,
                                           "exchange": rep.exchange})


def check_supermodularity(samples: int = 10**4, seed: int = 0,
                          params: Optional[SystemParams] = None) -> list[CheckResult]:
    """Download-time objective must show zero violations; the delay objective is reported."""
    params = params or baseline_params(True, K=3, n=9, M=1, m=8, m0=4, n_cache=3)
    pop = zipf_popularity(params)
    out = []
    for objective, info in ((Objective.AVG_DOWNLOAD_TIME, False), (Objective.MPSQ_DELAY, True)):
        sup = supermodularity_check(objective, params, pop, samples, seed)
        mono = monotonicity_check(objective, params, pop, samples, seed)
        out.append(CheckResult(f"supermodularity[{objective.value}]", sup.ok and mono.ok,
                               {"samples": sup.samples, "violations": sup.violations,
                                "max_violation": sup.max_violation,
                                "monotonicity_violations": mono.violations},
                               informational=info))
    return out


def _random_rates(rng, count: int) -> list[ClusterRates]:
    out = []
    while len(out) < count:
        mu = rng.uniform(0.5, 50.0, 3)
        frac = rng.dirichlet(np.ones(3))
        rho = rng.uniform(0.01, 0.99)
        lam = rho / np.sum(frac / mu)
        out.append(ClusterRates(*(lam * frac), *mu))
    return out


def check_pk_identity(count: int = 1000, seed: int = 0, rtol: float = 1e-12,
                      delay_fn: Callable[[ClusterRates], float] = cluster_delay) -> CheckResult:
    """Closed-form cluster delay against the mean-residual form on random stable rate vectors.

    ``delay_fn`` can be swapped for a tampered implementation as a negative control.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for r in _random_rates(rng, count):
        ref = pollaczek_khinchine_delay(r)
        worst = max(worst, abs(delay_fn(r) - ref) / ref)
    return CheckResult("pk-identity", worst <= rtol, {"vectors": count, "max_rel_error": worst})


def check_mm1_reduction(count: int = 1000, seed: int = 1, rtol: float = 1e-12) -> CheckResult:
    """Single-mode delay equals ``1 / (mu - lambda)`` for each mode slot."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        mu = rng.uniform(0.1, 100.0)
        lam = mu * rng.uniform(0.01, 0.99)
        arr, svc = [0.0, 0.0, 0.0], list(rng.uniform(0.1, 100.0, 3))
        arr[i % 3], svc[i % 3] = lam, mu
        d = cluster_delay(ClusterRates(*arr, *svc))
        ref = 1.0 / (mu - lam)
        worst = max(worst, abs(d - ref) / ref)
    return CheckResult("mm1-reduction", worst <= rtol, {"vectors": count, "max_rel_error": worst})


def check_greedy_ratio(instances: Optional[list[SystemParams]] = None,
                       objective: Objective = Objective.AVG_DOWNLOAD_TIME) -> CheckResult:
    instances = instances if instances is not None else golden_instances()
    ratios = []
    for p in instances:
        pop = zipf_popularity(p)
        g = greedy_caching(p, pop, objective).final_placement
        opt, _ = brute_force_optimal(p, pop, objective)
        ratios.append(reduction_ratio(p, pop, g, opt, objective))
    worst = float(min(ratios))
    return CheckResult("greedy-ratio", worst >= GREEDY_BOUND - 1e-12,
                       {"instances": len(ratios), "min_ratio": worst, "bound": GREEDY_BOUND,
                        "optimal_count": sum(r >= 1 - 1e-9 for r in ratios)})


def load_point(rho: float, params: Optional[SystemParams] = None) -> ClusterRates:
    """Cluster rates with the default mode mix scaled to traffic intensity ``rho``."""
    params = params or baseline_params()
    base = cluster_rates(cpf_placement(params), zipf_popularity(params), params)[0]
    return base.scaled(rho / base.rho)


def check_geometric_fit(loads=(0.3, 0.5, 0.8), num_requests: int = 1_000_000, seed: int = 0,
                        rtol: float = 0.05) -> CheckResult:
    """Processor-sharing occupancy mean against ``zeta / (zeta_c - zeta)``."""
    params = baseline_params()
    measured, ok = {}, True
    for i, rho in enumerate(loads):
        rates = load_point(rho, params)
        rep = throughput_report(rates, params)
        stats = simulate_cluster(rates, SimConfig(num_requests, seed=seed + i), discipline="ps")
        fit = geometric_fit(stats, rep.zeta, rep.zeta_c)
        measured[f"rho{rho}_rel_error"] = fit.relative_error
        measured[f"rho{rho}_tv"] = fit.total_variation
        ok &= fit.relative_error <= rtol
    return CheckResult("geometric-fit", ok, measured)


def check_outage_crosscheck(ys=(1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 24, 30, 40, 60),
                            atol: float = 1e-9) -> CheckResult:
    """Range-sum outage against the outage read off the explicit placement."""
    worst = 0.0
    for y in ys:
        p = baseline_params(n=120, K=120 // y, m=108, m0=60, M=1, beta=0.5)
        p = p.evolve(N=None, y=y)
        rep = outage_exact(p)
        worst = max(worst, abs(rep.p_outage_coop - rep.p_outage_generic))
    return CheckResult("outage-crosscheck", worst <= atol, {"points": len(ys), "max_abs_diff": worst})


def verify_suite(quick: bool = False) -> SuiteReport:
    """Run every check. ``quick`` shrinks sample counts for smoke runs."""
    samples = 2000 if quick else 10**4
    checks = [check_matroid()]
    checks += check_supermodularity(samples)
    checks += [check_pk_identity(), check_mm1_reduction(),
               check_greedy_ratio(golden_instances()[:8] if quick else None),
               check_geometric_fit(num_requests=200_000 if quick else 1_000_000),
               check_outage_crosscheck()]
    return SuiteReport(checks)
