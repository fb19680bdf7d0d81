"""Cluster and network delay, cooperation gain, download time and energy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SystemParams
from .rates import ClusterRates, ServiceModel, cluster_rates, mode_fractions

__all__ = [
    "UnstableQueueError",
    "DelayReport",
    "EnergyReport",
    "cluster_delay",
    "pollaczek_khinchine_delay",
    "network_delay",
    "noncoop_network_delay",
    "delay_gain",
    "cooperation_gain",
    "avg_download_time",
    "energy_per_cluster",
]


class UnstableQueueError(ArithmeticError):
    """A cluster queue has traffic intensity >= 1, so its delay is infinite."""

    def __init__(self, rho: float, cluster: int | None = None):
        self.rho = rho
        self.cluster = cluster
        where = f"cluster {cluster}" if cluster is not None else "queue"
        super().__init__(f"{where} is unstable (rho = {rho:.4f} >= 1)")


@dataclass(frozen=True)
class DelayReport:
    per_cluster_delay: tuple[float, ...]
    network_delay: float
    stable: bool
    rho: tuple[float, ...]
    rates: tuple[ClusterRates, ...] = ()

    @property
    def unstable_clusters(self) -> list[int]:
        return [k + 1 for k, r in enumerate(self.rho) if r >= 1.0]


@dataclass(frozen=True)
class EnergyReport:
    """Transmission energy of the local and remote modes.

    ``e_lc``/``e_rc`` are joules per second spent by one cluster; the
    ``*_per_request`` values are joules per served request.
    """

    e_lc: float
    e_rc: float
    e_lc_per_request: float
    e_rc_per_request: float


def cluster_delay(rates: ClusterRates, lam: float | None = None) -> float:
    """Mean sojourn time of one cluster's request queue.

    ``rho / lam + sum_j(lam_j / mu_j**2) / (1 - rho)``, which is the M/G/1
    FIFO sojourn time when a mode-``j`` request needs an exponential
    service time with rate ``mu_j``.

    Raises
    ------
    UnstableQueueError
        If the traffic intensity is >= 1.
    ValueError
        If the cluster receives no requests.
    """
    arr, mu = rates.arrivals, rates.services
    if lam is None:
        lam = float(arr.sum())
    if lam <= 0:
        raise ValueError("cluster delay undefined for zero arrival rate")
    rho = float(np.sum(arr / mu))
    if rho >= 1.0:
        raise UnstableQueueError(rho)
    return rho / lam + float(np.sum(arr / mu**2)) / (1.0 - rho)


def pollaczek_khinchine_delay(rates: ClusterRates) -> float:
    """Same quantity written as ``E[S] + lam * E[S^2] / (2 (1 - rho))``.

    Kept separate from :func:`cluster_delay` as an independent check.
    """
    arr, mu = rates.arrivals, rates.services
    lam = arr.sum()
    w = arr / lam
    es = np.sum(w / mu)
    es2 = np.sum(w * 2.0 / mu**2)
    rho = lam * es
    if rho >= 1.0:
        raise UnstableQueueError(float(rho))
    return float(es + lam * es2 / (2.0 * (1.0 - rho)))


def _report(rates: Sequence[ClusterRates], params: SystemParams, strict: bool) -> DelayReport:
    delays, rhos = [], []
    for k, r in enumerate(rates, start=1):
        rho = r.rho
        rhos.append(rho)
        if rho >= 1.0:
            if strict:
                raise UnstableQueueError(rho, cluster=k)
            delays.append(float("inf"))
        elif params.lambda_per_cluster[k - 1] == 0:
            delays.append(0.0)
        else:
            delays.append(cluster_delay(r, params.lambda_per_cluster[k - 1]))
    lam = params.lam
    stable = all(rho < 1.0 for rho in rhos)
    total = float(np.dot(lam, delays) / lam.sum()) if stable else float("inf")
    return DelayReport(tuple(delays), total, stable, tuple(rhos), tuple(rates))


def network_delay(c, pop, params: SystemParams,
                  model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                  strict: bool = True) -> DelayReport:
    """Request-weighted mean delay over all clusters.

    With ``strict=False`` an unstable cluster yields an infinite delay and
    ``stable=False`` instead of raising.
    """
    return _report(cluster_rates(c, pop, params, model), params, strict)


def noncoop_network_delay(c, pop, params: SystemParams,
                          model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                          strict: bool = True) -> DelayReport:
    """Network delay when clusters do not share content with each other."""
    return _report(cluster_rates(c, pop, params, model, cooperative=False), params, strict)


def delay_gain(d_coop: float, d_noncoop: float) -> float:
    """Relative delay reduction ``1 - d_coop / d_noncoop``."""
    if not (d_coop > 0 and d_noncoop > 0):
        raise ValueError(f"delays must be positive, got {d_coop} and {d_noncoop}")
    return 1.0 - d_coop / d_noncoop


def cooperation_gain(c, pop, params: SystemParams,
                     model: ServiceModel = ServiceModel.FIXED_AVERAGE):
    """``(gain, baseline_unstable, coop_report, noncoop_report)`` for placement ``c``.

    If only the non-cooperative system is unstable, the gain is 1.0 and
    ``baseline_unstable`` is True. If the cooperative system is unstable
    too, the gain is NaN.
    """
    coop = network_delay(c, pop, params, model, strict=False)
    noncoop = noncoop_network_delay(c, pop, params, model, strict=False)
    if not coop.stable:
        return float("nan"), not noncoop.stable, coop, noncoop
    if not noncoop.stable:
        return 1.0, True, coop, noncoop
    return delay_gain(coop.network_delay, noncoop.network_delay), False, coop, noncoop


def avg_download_time(c, pop, params: SystemParams) -> float | np.ndarray:
    """Mean file download time, ignoring queueing.

    Each request takes ``S/R_D``, ``S/R_WL`` or ``S/R_BH`` seconds depending
    on where the file is found; clusters are weighted by their request
    rates. Accepts a batch of placements ``(..., K, m)``.
    """
    frac = mode_fractions(c, pop)
    weights = params.lam / params.lam.sum()
    return np.einsum("...kj,j,k->...", frac, params.tau, weights)[()]


def energy_per_cluster(rates: ClusterRates, params: SystemParams) -> EnergyReport:
    e_lc_req = params.p_lc * params.mean_file_size / params.r_d2d
    e_rc_req = params.p_rc * params.mean_file_size / params.r_cell_avg
    return EnergyReport(rates.lambda_lc * e_lc_req, rates.lambda_rc * e_rc_req,
                        e_lc_req, e_rc_req)
