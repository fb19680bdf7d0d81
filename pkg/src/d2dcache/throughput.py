"""Traffic demand, per-request throughput, outage probability and throughput scaling.

Throughput quantities are in bits/second. The outage and scaling results
describe the popular-file placement seen from cluster 1, whose cached
range starts at file 1.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import SystemParams, cluster_shift, zipf_popularity
from .placement import cpf_placement
from .rates import (
    ClusterRates,
    ServiceModel,
    cluster_rates,
    cpf_arrival_rates_closed_form,
    mode_fractions,
)

__all__ = [
    "SaturationError",
    "TrafficDemand",
    "ThroughputReport",
    "OutageReport",
    "OutageApprox",
    "ScalingReport",
    "ClusterSizeCurve",
    "traffic_demand",
    "critical_demand",
    "per_request_throughput",
    "throughput_report",
    "network_per_request_throughput",
    "outage_exact",
    "outage_report",
    "outage_approx",
    "zipf_partial_sum_approx",
    "zipf_range_sum_approx",
    "scaling_exponent",
    "expected_good_clusters",
    "scaling_bound",
    "throughput_vs_cluster_size",
]


class SaturationError(ArithmeticError):
    """Offered traffic meets or exceeds the critical demand."""


class TrafficDemand(NamedTuple):
    lc: float
    rc: float
    bh: float
    total: float


@dataclass(frozen=True)
class ThroughputReport:
    zeta_per_mode: tuple[float, float, float]
    zeta: float
    zeta_c: float
    mean_queue: float
    per_request_throughput: float
    stable: bool
    zero_demand: bool = False


def traffic_demand(rates: ClusterRates, params: SystemParams) -> TrafficDemand:
    """Offered bit rate per mode, ``lambda_j * S``."""
    z = rates.arrivals * params.mean_file_size
    return TrafficDemand(float(z[0]), float(z[1]), float(z[2]), float(z.sum()))


def critical_demand(zeta_modes: Sequence[float], params: SystemParams,
                    mode_rates: Optional[Sequence[float]] = None) -> float:
    """Offered bit rate at which the cluster queue saturates.

    ``zeta / (zeta_lc / R_D + zeta_rc / R_WL + zeta_bh / R_BH)``: the
    request-weighted harmonic mean of the mode rates. For zero demand the
    all-local limit ``R_D`` is returned.
    """
    z = np.asarray(zeta_modes[:3], dtype=float)
    rates = np.asarray(mode_rates if mode_rates is not None
                       else (params.r_d2d, params.r_cell_avg, params.r_bh_avg), dtype=float)
    total = z.sum()
    if total <= 0:
        return float(rates[0])
    return float(total / np.sum(z / rates))


def per_request_throughput(zeta: float, zeta_c: float) -> tuple[float, float]:
    """``(zeta_c - zeta, zeta / (zeta_c - zeta))``: per-request rate and mean occupancy."""
    if zeta >= zeta_c:
        raise SaturationError(f"demand {zeta:g} >= critical demand {zeta_c:g}")
    return zeta_c - zeta, zeta / (zeta_c - zeta)


def throughput_report(rates: ClusterRates, params: SystemParams) -> ThroughputReport:
    """Throughput summary of one cluster, using its actual service rates."""
    z = traffic_demand(rates, params)
    modes = rates.services * params.mean_file_size
    zc = critical_demand(z, params, modes)
    stable = z.total < zc
    if stable:
        r, nq = per_request_throughput(z.total, zc)
    else:
        r, nq = 0.0, float("inf")
    return ThroughputReport((z.lc, z.rc, z.bh), z.total, zc, nq, r, stable, z.total == 0)


def network_per_request_throughput(c, pop, params: SystemParams,
                                   model: ServiceModel = ServiceModel.FIXED_AVERAGE) -> float:
    """Request-weighted mean of the clusters' per-request throughput; NaN if any cluster saturates."""
    reports = [throughput_report(r, params) for r in cluster_rates(c, pop, params, model)]
    if not all(rep.stable for rep in reports):
        return float("nan")
    w = params.lam / params.lam.sum()
    return float(np.dot(w, [rep.per_request_throughput for rep in reports]))


@dataclass(frozen=True)
class OutageReport:
    """Outage of the popular-file placement seen from one cluster.

    ``p_outage_generic`` recomputes the cooperative outage from the
    explicit placement matrix as a cross-check. Approximate fields are NaN
    unless filled by :func:`outage_report`.
    """

    cluster: int
    p_outage_coop: float
    p_no_outage_noncoop_exact: float
    p_outage_generic: float
    p_no_outage_noncoop_approx: float = float("nan")
    p_no_outage_wc_approx: float = float("nan")

    @property
    def p_outage_noncoop(self) -> float:
        return 1.0 - self.p_no_outage_noncoop_exact

    @property
    def p_outage_noncoop_approx(self) -> float:
        return 1.0 - self.p_no_outage_noncoop_approx


def outage_exact(params: SystemParams, cluster: int = 1, pop=None,
                 literal: bool = False) -> OutageReport:
    """Probability that a request finds its file in no cluster (cooperative) or not locally.

    Uses cluster cache ``N`` (``y * M`` unless overridden). ``literal``
    selects the range-sum form of
    :func:`d2dcache.rates.cpf_arrival_rates_closed_form`.
    """
    if pop is None:
        pop = zipf_popularity(params)
    unit = params.evolve(lambda_per_cluster=1.0)
    local, remote, _ = cpf_arrival_rates_closed_form(unit, cluster, pop, literal=literal)
    frac = mode_fractions(cpf_placement(params), pop)[cluster - 1]
    return OutageReport(cluster, _clip(1.0 - local - remote), _clip(local),
                        _clip(float(frac[2])))


def outage_report(params: SystemParams, cluster: int = 1) -> OutageReport:
    """Exact outage plus the closed-form approximation (``beta != 1``)."""
    exact = outage_exact(params, cluster)
    approx = outage_approx(params)
    return replace(exact, p_no_outage_noncoop_approx=approx.p_no_outage_noncoop,
                   p_no_outage_wc_approx=approx.p_no_outage_coop_increment)


def _clip(p: float) -> float:
    return float(min(max(p, 0.0), 1.0))


def zipf_partial_sum_approx(q: float, beta: float) -> float:
    """Integral approximation of ``sum_{i=1}^{q} i**-beta``: ``((q + 1)**(1 - beta) - 1) / (1 - beta)``."""
    if beta == 1:
        raise ValueError("integral approximation is singular at beta = 1")
    return ((q + 1.0) ** (1.0 - beta) - 1.0) / (1.0 - beta)


def zipf_range_sum_approx(w: float, q: float, beta: float) -> float:
    """Approximation of ``sum_{i=w+1}^{q-1} i**-beta`` by the integral over ``[w, q]``
    minus half of the two end-point terms. Zero for an empty range."""
    if beta == 1:
        raise ValueError("integral approximation is singular at beta = 1")
    if q - 1 < w + 1:
        return 0.0
    integral = (q ** (1.0 - beta) - w ** (1.0 - beta)) / (1.0 - beta)
    return integral - (w ** (-beta) + q ** (-beta)) / 2.0


@dataclass(frozen=True)
class OutageApprox:
    """Approximate no-outage probability split into the local part and the cooperation increment."""

    p_no_outage_noncoop: float
    p_no_outage_coop_increment: float

    @property
    def p_no_outage_coop(self) -> float:
        return _clip(self.p_no_outage_noncoop + self.p_no_outage_coop_increment)

    @property
    def p_outage_coop(self) -> float:
        return 1.0 - self.p_no_outage_coop

    @property
    def p_outage_noncoop(self) -> float:
        return 1.0 - self.p_no_outage_noncoop


def outage_approx(params: SystemParams) -> OutageApprox:
    """Closed-form approximation of the no-outage probability seen from cluster 1.

    Raises
    ------
    ValueError
        For ``beta = 1``, where the approximation is singular.
    """
    beta = params.beta
    if beta == 1:
        raise ValueError("outage approximation is singular at beta = 1")
    m, N, m0 = params.m, params.capacity, params.m0
    norm = zipf_partial_sum_approx(m, beta)
    nc = zipf_partial_sum_approx(N, beta) / norm
    wc = 0.0
    for j in range(2, params.K + 1):
        w = max(cluster_shift(j, m0), cluster_shift(j - 1, m0) + N)
        q = min(cluster_shift(j, m0) + N + 1, m + 1)
        wc += zipf_range_sum_approx(w, q, beta)
    return OutageApprox(_clip(nc), max(wc / norm, 0.0))


def scaling_exponent(beta: float) -> float:
    """``(1 - beta) / (2 - beta)``: cluster size grows as ``m**gamma`` in the scaling regime."""
    return (1.0 - beta) / (2.0 - beta)


def expected_good_clusters(n: float, y: float, p_local: float) -> float:
    """Expected number of clusters with at least one locally servable request.

    ``p_local`` is the probability that one user's request is cached in its
    own cluster; a cluster of ``y`` users is idle with probability
    ``(1 - p_local)**y``.
    """
    return (n / y) * (1.0 - (1.0 - p_local) ** y)


def _local_hit_approx(M: float, y: float, m: float, beta: float) -> float:
    return min(zipf_partial_sum_approx(M * y, beta) / zipf_partial_sum_approx(m, beta), 1.0)


@dataclass(frozen=True)
class ScalingReport:
    gamma: float
    expected_good_clusters: float
    t_sum_upper: float
    t_sum_asymptotic: float
    loglog_slope: float
    m_grid: tuple[float, ...]
    dominant_term: tuple[float, ...]
    degenerate: bool = False


def _dominant_term(n, m, beta, M, rho_scale, C):
    y = rho_scale * m ** scaling_exponent(beta)
    return C * expected_good_clusters(n, y, _local_hit_approx(M, y, m, beta))


def scaling_bound(params: SystemParams, m_grid: Optional[Sequence[float]] = None,
                  C: Optional[float] = None) -> ScalingReport:
    """Upper bound on the average sum throughput and its decay with library size.

    ``t_sum_upper`` is ``C * (E[L] + k1)`` at the parameters' own ``n``,
    ``y`` and ``m``. ``t_sum_asymptotic`` evaluates the large-``m`` limit
    ``(C / rho) * (1 - exp(-rho**(2 - beta) * M**(1 - beta))) * n / m**gamma
    + k1 * C``. ``loglog_slope`` fits ``d log T / d log m`` of the
    dominant term ``C * E[L]`` with ``y = rho * m**gamma`` over ``m_grid``
    (default ``10**3 .. 10**6``).

    At ``beta = 1`` only ``gamma = 0`` is computed; the approximations are
    singular there, so the other fields are NaN and ``degenerate`` is set.
    """
    beta = params.beta
    gamma = scaling_exponent(beta)
    grid = np.asarray(m_grid if m_grid is not None else np.logspace(3, 6, 31), dtype=float)
    C = params.r_d2d if C is None else C
    k1 = params.k1_rate_ratio
    rho = params.rho_scale
    if beta == 1:
        nan = float("nan")
        return ScalingReport(gamma, nan, nan, nan, nan, tuple(grid), (), degenerate=True)
    p_local = _local_hit_approx(params.M, params.y, params.m, beta)
    el = expected_good_clusters(params.n, params.y, p_local)
    t_upper = C * (el + k1)
    t_asym = (C / rho) * (1.0 - np.exp(-rho ** (2.0 - beta) * params.M ** (1.0 - beta))) \
        * params.n / params.m ** gamma + k1 * C
    dom = np.array([_dominant_term(params.n, m, beta, params.M, rho, C) for m in grid])
    slope = float(np.polyfit(np.log(grid), np.log(dom), 1)[0])
    return ScalingReport(gamma, float(el), float(t_upper), float(t_asym), slope,
                         tuple(grid), tuple(dom))


@dataclass(frozen=True)
class ClusterSizeCurve:
    y: np.ndarray
    t_sum_bound: np.ndarray
    per_user: np.ndarray
    expected_good_clusters: np.ndarray

    @property
    def argmax_y(self) -> float:
        return float(self.y[int(np.argmax(self.t_sum_bound))])

    @property
    def interior_maximum(self) -> bool:
        i = int(np.argmax(self.t_sum_bound))
        return 0 < i < len(self.y) - 1


def throughput_vs_cluster_size(params: SystemParams, y_grid: Sequence[float],
                               C: Optional[float] = None) -> ClusterSizeCurve:
    """Sum-throughput bound ``C * (E[L] + k1)`` as the ``n`` users are regrouped into clusters of ``y``.

    The per-user column divides the bound by ``n``.
    """
    if params.beta == 1:
        raise ValueError("sum-throughput bound uses the beta != 1 approximation")
    C = params.r_d2d if C is None else C
    ys = np.asarray(y_grid, dtype=float)
    el = np.array([expected_good_clusters(params.n, y,
                                          _local_hit_approx(params.M, y, params.m, params.beta))
                   for y in ys])
    t = C * (el + params.k1_rate_ratio)
    return ClusterSizeCurve(ys, t, t / params.n, el)
