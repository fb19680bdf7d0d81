"""Discrete-event simulation of a cluster's request queue.

Requests arrive as a Poisson stream; each one is independently tagged with
a delivery mode (local, remote, backhaul) in proportion to the mode
arrival rates and needs an exponential amount of service at the mode's
rate.

Two disciplines are available:

``"fifo"``
    one request at a time, first come first served. Its mean sojourn time
    is exactly :func:`d2dcache.delay.cluster_delay`.
``"ps"``
    egalitarian processor sharing: with ``x`` requests present, each one
    is served at ``1/x`` of its mode rate. The number in system is then
    geometric with mean ``rho / (1 - rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats as sps

from .core import SystemParams
from .delay import DelayReport, UnstableQueueError, network_delay
from .rates import ClusterRates, ServiceModel, cluster_rates

__all__ = [
    "SimConfig",
    "SimStats",
    "NetworkSimResult",
    "GeometricFit",
    "simulate_cluster",
    "simulate_network",
    "geometric_fit",
]


@dataclass(frozen=True)
class SimConfig:
    num_requests: int = 100_000
    warmup_fraction: float = 0.1
    seed: Optional[int] = 0
    batch_count: int = 20

    def __post_init__(self):
        if not 0 <= self.warmup_fraction < 0.5:
            raise ValueError("warmup_fraction must lie in [0, 0.5)")
        if self.batch_count < 2:
            raise ValueError("need at least two batches for a confidence interval")
        if self.num_requests < 10 * self.batch_count:
            raise ValueError(
                f"num_requests={self.num_requests} too small for {self.batch_count} batches")


@dataclass
class SimStats:
    mean_delay: float
    ci_half_width: float
    per_mode_counts: tuple[int, int, int]
    queue_length_histogram: np.ndarray
    empirical_rho: float
    mean_in_system: float
    arrival_rate: float
    discipline: str
    batch_means: np.ndarray = field(repr=False, default=None)

    @property
    def served(self) -> int:
        return int(sum(self.per_mode_counts))

    @property
    def mean_queue_length(self) -> float:
        """Mean number in system seen by arriving requests."""
        h = self.queue_length_histogram
        return float(np.dot(np.arange(h.size), h))

    @property
    def samples(self) -> int:
        return self.served


def _batch_ci(values: np.ndarray, batches: int) -> tuple[float, float, np.ndarray]:
    usable = values[: values.size - values.size % batches]
    means = usable.reshape(batches, -1).mean(axis=1)
    half = sps.t.ppf(0.975, batches - 1) * means.std(ddof=1) / np.sqrt(batches)
    return float(values.mean()), float(half), means


def _time_average_in_system(arrivals, departures, t0, t1) -> float:
    times = np.concatenate([arrivals, departures])
    steps = np.concatenate([np.ones_like(arrivals), -np.ones_like(departures)])
    order = np.argsort(times, kind="stable")
    times, level = times[order], np.cumsum(steps[order])
    inside = (times >= t0) & (times < t1)
    t = np.concatenate([[t0], times[inside], [t1]])
    before = np.searchsorted(times, t0, side="left")
    start_level = level[before - 1] if before > 0 else 0
    lv = np.concatenate([[start_level], level[inside]])
    return float(np.sum(lv * np.diff(t)) / (t1 - t0))


def _fifo(lam, probs, mu, n, rng):
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n))
    modes = rng.choice(3, size=n, p=probs)
    service = rng.exponential(1.0 / mu[modes])
    work = np.cumsum(service)
    departures = work + np.maximum.accumulate(arrivals - (work - service))
    seen = np.arange(n) - np.searchsorted(departures, arrivals, side="right")
    return arrivals, departures, modes, service, seen


def _ps(lam, probs, mu, n, rng):
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n))
    modes = rng.choice(3, size=n, p=probs)
    departures = np.empty(n)
    seen = np.empty(n, dtype=np.int64)
    present: list[list[int]] = [[], [], []]
    x = [0, 0, 0]
    m0, m1, m2 = (float(v) for v in mu)
    arr = arrivals.tolist()
    mode_list = modes.tolist()
    draws = iter(())
    t = 0.0
    i = 0
    done = 0
    while done < n:
        total = x[0] + x[1] + x[2]
        try:
            e, u, v = next(draws)
        except StopIteration:
            draws = zip(rng.exponential(size=8192).tolist(), rng.random(size=8192).tolist(),
                        rng.random(size=8192).tolist())
            e, u, v = next(draws)
        if total:
            w0, w1, w2 = m0 * x[0], m1 * x[1], m2 * x[2]
            wsum = w0 + w1 + w2
            next_dep = t + e * total / wsum
        else:
            next_dep = float("inf")
        if i < n and arr[i] <= next_dep:
            # memoryless service: discarding the unused departure draw is exact
            t = arr[i]
            seen[i] = total
            j = mode_list[i]
            present[j].append(i)
            x[j] += 1
            i += 1
            continue
        t = next_dep
        # class j departs with probability mu_j x_j / sum(mu x)
        u *= wsum
        j = 0 if u < w0 else (1 if u < w0 + w1 else 2)
        if x[j] == 0:
            j = max(range(3), key=lambda q: x[q])
        members = present[j]
        pos = int(v * len(members))
        job = members[pos]
        members[pos] = members[-1]
        members.pop()
        x[j] -= 1
        departures[job] = t
        done += 1
    service = np.full(n, np.nan)
    return arrivals, departures, modes, service, seen


def simulate_cluster(rates: ClusterRates, config: SimConfig = SimConfig(),
                     discipline: str = "fifo", rng=None) -> SimStats:
    """Simulate one cluster queue and summarise delay and occupancy.

    The first ``warmup_fraction`` of requests (by arrival order) are
    discarded. The confidence half-width is a 95% batch-means interval.

    Raises
    ------
    UnstableQueueError
        If the offered load is >= 1.
    """
    lam = rates.total
    if lam <= 0:
        raise ValueError("cluster has no arrivals to simulate")
    rho = rates.rho
    if rho >= 1.0:
        raise UnstableQueueError(rho)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    probs = rates.arrivals / lam
    mu = rates.services
    n = config.num_requests
    run = {"fifo": _fifo, "ps": _ps}.get(discipline)
    if run is None:
        raise ValueError(f"unknown discipline {discipline!r}")
    arrivals, departures, modes, service, seen = run(lam, probs, mu, n, rng)

    w = int(config.warmup_fraction * n)
    sojourn = departures[w:] - arrivals[w:]
    if sojourn.size < 10 * config.batch_count:
        raise ValueError("not enough post-warmup requests for the requested batches")
    mean, half, bmeans = _batch_ci(sojourn, config.batch_count)
    t0, t1 = arrivals[w], arrivals[-1]
    in_system = _time_average_in_system(arrivals, departures, t0, t1)
    if discipline == "fifo":
        # work done inside [t0, t1]: each job's service interval is [D - S, D]
        start = departures - service
        busy = np.clip(np.minimum(departures, t1) - np.maximum(start, t0), 0.0, None).sum()
        emp_rho = float(busy / (t1 - t0))
    else:
        # under processor sharing the server idles only when the system is empty
        emp_rho = 1.0 - float(np.mean(seen[w:] == 0))
    hist = np.bincount(seen[w:]).astype(float)
    hist /= hist.sum()
    counts = np.bincount(modes[w:], minlength=3)
    emp_lam = (n - w - 1) / (t1 - t0)
    return SimStats(mean, half, tuple(int(v) for v in counts), hist, emp_rho, in_system,
                    float(emp_lam), discipline, bmeans)


@dataclass
class NetworkSimResult:
    cluster_stats: list[Optional[SimStats]]
    sim_delay: float
    ci_half_width: float
    analytic: DelayReport

    @property
    def relative_error(self) -> float:
        return abs(self.sim_delay - self.analytic.network_delay) / self.analytic.network_delay


def simulate_network(c, pop, params: SystemParams,
                     model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                     config: SimConfig = SimConfig(), discipline: str = "fifo") -> NetworkSimResult:
    """Simulate every cluster with its own seed stream and aggregate by request rate."""
    analytic = network_delay(c, pop, params, model, strict=True)
    rates = cluster_rates(c, pop, params, model)
    streams = np.random.SeedSequence(config.seed).spawn(params.K)
    lam = params.lam
    weights = lam / lam.sum()
    per_cluster: list[Optional[SimStats]] = []
    total, var = 0.0, 0.0
    for k, (r, ss) in enumerate(zip(rates, streams)):
        if lam[k] == 0:
            per_cluster.append(None)
            continue
        st = simulate_cluster(r, config, discipline, rng=np.random.default_rng(ss))
        per_cluster.append(st)
        total += weights[k] * st.mean_delay
        var += (weights[k] * st.ci_half_width) ** 2
    return NetworkSimResult(per_cluster, float(total), float(np.sqrt(var)), analytic)


@dataclass(frozen=True)
class GeometricFit:
    """Simulated occupancy against a geometric law with mean ``zeta / (zeta_c - zeta)``."""

    empirical_mean: float
    predicted_mean: float
    relative_error: float
    chi2: float
    dof: int
    p_value: float
    total_variation: float


def geometric_fit(stats: SimStats, zeta: float, zeta_c: float, min_expected: float = 5.0) -> GeometricFit:
    """Compare the arrival-epoch occupancy histogram with ``P(n) = (1 - r) r**n``, ``r = zeta / zeta_c``.

    The chi-square statistic lumps the tail so every bin expects at least
    ``min_expected`` samples. Occupancy samples are autocorrelated, so the
    p-value overstates the evidence; treat it as a descriptive statistic.
    """
    if zeta >= zeta_c:
        raise ValueError("geometric law requires zeta < zeta_c")
    r = zeta / zeta_c
    predicted = r / (1.0 - r)
    hist = stats.queue_length_histogram
    emp_mean = stats.mean_queue_length
    total = stats.samples
    observed = hist * total
    top = max(hist.size, 1)
    pmf = (1.0 - r) * r ** np.arange(top)
    expected = pmf * total
    last = 0
    while last + 1 < top and expected[last + 1] >= min_expected:
        last += 1
    obs_bins = np.append(observed[: last + 1], observed[last + 1:].sum())
    exp_bins = np.append(expected[: last + 1], total - expected[: last + 1].sum())
    keep = exp_bins > 0
    chi2 = float(np.sum((obs_bins[keep] - exp_bins[keep]) ** 2 / exp_bins[keep]))
    dof = int(keep.sum() - 1)
    p_value = float(sps.chi2.sf(chi2, dof)) if dof > 0 else float("nan")
    tv = 0.5 * (np.abs(hist - pmf[: hist.size]).sum() + r ** hist.size)
    rel = abs(emp_mean - predicted) / predicted if predicted > 0 else abs(emp_mean)
    return GeometricFit(emp_mean, predicted, float(rel), chi2, dof, p_value, float(tv))
