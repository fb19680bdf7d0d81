"""Per-cluster mode arrival rates, sharing counts, service rates and load.

A request from cluster ``k`` for file ``f`` is served locally (D2D) when
``c[k, f] = 1``, by a remote cluster through the base station when some
other cluster caches ``f``, and over the backhaul otherwise.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SystemParams, as_placement, cluster_shift

__all__ = [
    "ServiceModel",
    "ClusterRates",
    "SharingCounts",
    "ModeRates",
    "mode_fractions",
    "mode_arrival_rates",
    "cpf_arrival_rates_closed_form",
    "mean_sharing_counts",
    "service_rates",
    "traffic_intensity",
    "cluster_rates",
]


class ServiceModel(enum.Enum):
    """How the cellular and backhaul service rates are obtained.

    ``FIXED_AVERAGE`` uses the effective rates ``R_WL`` and ``R_BH`` as
    given. ``SHARED_BY_MEAN`` divides the aggregate rates by the mean
    number of clusters sharing them.
    """

    FIXED_AVERAGE = "fixed-average"
    SHARED_BY_MEAN = "shared-by-mean"


class ModeRates(NamedTuple):
    lc: float
    rc: float
    bh: float


@dataclass(frozen=True)
class ClusterRates:
    """Arrival and service rates of one cluster's queue (requests/second)."""

    lambda_lc: float
    lambda_rc: float
    lambda_bh: float
    mu_lc: float
    mu_rc: float
    mu_bh: float

    @property
    def arrivals(self) -> np.ndarray:
        return np.array([self.lambda_lc, self.lambda_rc, self.lambda_bh])

    @property
    def services(self) -> np.ndarray:
        return np.array([self.mu_lc, self.mu_rc, self.mu_bh])

    @property
    def total(self) -> float:
        return self.lambda_lc + self.lambda_rc + self.lambda_bh

    @property
    def rho(self) -> float:
        return traffic_intensity(self)

    @property
    def stable(self) -> bool:
        return self.rho < 1.0

    def scaled(self, factor: float) -> "ClusterRates":
        """Same mode mix and service rates with arrivals multiplied by ``factor``."""
        return ClusterRates(self.lambda_lc * factor, self.lambda_rc * factor,
                            self.lambda_bh * factor, self.mu_lc, self.mu_rc, self.mu_bh)


@dataclass(frozen=True)
class SharingCounts:
    n_a_mean: float
    n_b_mean: float


def mode_fractions(c, pop) -> np.ndarray:
    """Fraction of each cluster's requests served per mode.

    ``c`` may carry leading batch axes, ``(..., K, m)``; the result has
    shape ``(..., K, 3)`` with columns (local, remote, backhaul).
    """
    c = np.asarray(c, dtype=float)
    pop = np.asarray(pop, dtype=float)
    copies = c.sum(axis=-2, keepdims=True)
    elsewhere = copies - c
    local = c
    remote = (1.0 - c) * np.minimum(elsewhere, 1.0)
    backhaul = (copies == 0).astype(float)
    return np.stack([(pop * local).sum(-1), (pop * remote).sum(-1), (pop * backhaul).sum(-1)],
                    axis=-1)


def mode_arrival_rates(c, pop, params: SystemParams, k: int) -> ModeRates:
    """``(lambda_lc, lambda_rc, lambda_bh)`` of cluster ``k`` (1-based) for placement ``c``."""
    c = as_placement(c, (params.K, params.m))
    frac = mode_fractions(c, pop)[k - 1]
    return ModeRates(*(params.lambda_per_cluster[k - 1] * frac))


def _cyclic_interval(start: int, length: int, m: int) -> list[tuple[int, int]]:
    """Files ``start, start+1, ...`` (1-based, ``length`` of them) wrapping past ``m``."""
    length = min(length, m)
    if length <= 0:
        return []
    end = start + length - 1
    if end <= m:
        return [(start, end)]
    return [(start, m), (1, end - m)]


def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _subtract(intervals, cut):
    out = []
    for lo, hi in intervals:
        pieces = [(lo, hi)]
        for clo, chi in cut:
            nxt = []
            for plo, phi in pieces:
                if chi < plo or clo > phi:
                    nxt.append((plo, phi))
                    continue
                if plo < clo:
                    nxt.append((plo, clo - 1))
                if phi > chi:
                    nxt.append((chi + 1, phi))
            pieces = nxt
        out.extend(pieces)
    return out


def cpf_arrival_rates_closed_form(params: SystemParams, k: int, pop=None,
                                  literal: bool = False) -> ModeRates:
    """Mode arrival rates of cluster ``k`` under popular-file caching, by index ranges.

    Cluster ``j`` caches the contiguous (cyclic) file range starting at
    ``cluster_shift(j) + 1``. The local rate sums the popularity over the
    local range; the remote rate sums it over the remaining clusters'
    ranges, where the lower bound of cluster ``j``'s range is lifted to
    ``max(s_{j-1} + N + 1, s_j + 1)`` so that overlaps with cluster
    ``j - 1`` are counted once.

    With ``literal=True`` the ranges are summed exactly as written,
    clamped to ``[1, m]``. That form double-counts files of an earlier
    cluster ``j < k`` that are also cached locally, and ignores
    wrap-around, so it only agrees with the placement-based rates for
    ``k = 1`` without wrap. The default form removes the local range and
    follows wrap-around.
    """
    if pop is None:
        pop = np.asarray(_row_popularity(params, k))
    else:
        pop = np.asarray(pop)[k - 1] if np.ndim(pop) == 2 else np.asarray(pop)
    m, N, m0 = params.m, params.capacity, params.m0
    prefix = np.concatenate([[0.0], np.cumsum(pop)])

    def mass(intervals):
        return float(sum(prefix[hi] - prefix[lo - 1] for lo, hi in intervals if hi >= lo))

    s = {j: cluster_shift(j, m0) for j in range(1, params.K + 1)}
    lam = params.lambda_per_cluster[k - 1]
    if literal:
        local = [(max(s[k] + 1, 1), min(s[k] + N, m))]
        remote_mass = 0.0
        for j in range(1, params.K + 1):
            if j == k:
                continue
            lower = s[j] + 1 if j == 1 else max(s[j - 1] + N + 1, s[j] + 1)
            remote_mass += mass([(max(lower, 1), min(s[j] + N, m))])
        local_mass = mass(local)
        return ModeRates(lam * local_mass, lam * remote_mass,
                         lam * (1.0 - local_mass - remote_mass))

    local = _cyclic_interval(s[k] + 1, N, m)
    remote = []
    for j in range(1, params.K + 1):
        if j != k:
            remote.extend(_cyclic_interval(s[j] + 1, N, m))
    remote = _subtract(_merge(remote), _merge(local))
    local_mass, remote_mass = mass(local), mass(remote)
    return ModeRates(lam * local_mass, lam * remote_mass,
                     lam * max(1.0 - local_mass - remote_mass, 0.0))


def _row_popularity(params: SystemParams, k: int) -> np.ndarray:
    ranks = np.arange(1, params.m + 1, dtype=float) ** (-float(params.beta))
    return np.roll(ranks / ranks.sum(), cluster_shift(k, params.m0))


def mean_sharing_counts(params: SystemParams, arrivals) -> SharingCounts:
    """Mean number of clusters on the cellular and the backhaul path.

    ``arrivals`` is a ``(K, 3)`` array of per-mode arrival rates. With equal
    cluster rates this is ``K * lambda_rc / lambda_k``; with unequal rates
    the per-cluster rates are summed and divided by the mean cluster rate.
    """
    arrivals = np.asarray(arrivals, dtype=float)
    lam_bar = params.total_lambda / params.K
    if lam_bar <= 0:
        raise ValueError("mean cluster arrival rate is zero; sharing counts undefined")
    return SharingCounts(float(arrivals[..., 1].sum(-1) / lam_bar),
                         float(arrivals[..., 2].sum(-1) / lam_bar))


def service_rates(params: SystemParams, model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                  sharing: SharingCounts | None = None) -> np.ndarray:
    """``(mu_lc, mu_rc, mu_bh)`` in requests/second.

    Under ``SHARED_BY_MEAN`` a mode nobody uses (mean count 0) keeps its
    unshared rate; its arrival rate is zero so the value never matters.
    """
    mu = 1.0 / params.tau
    if model is ServiceModel.SHARED_BY_MEAN:
        if sharing is None:
            raise ValueError("SHARED_BY_MEAN needs sharing counts")
        if sharing.n_a_mean > 0:
            mu[1] /= sharing.n_a_mean
        if sharing.n_b_mean > 0:
            mu[2] /= sharing.n_b_mean
    return mu


def traffic_intensity(rates: ClusterRates) -> float:
    """Offered load ``sum_j lambda_j / mu_j``; the queue is stable below 1."""
    return float(np.sum(rates.arrivals / rates.services))


def cluster_rates(c, pop, params: SystemParams,
                  model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                  cooperative: bool = True) -> list[ClusterRates]:
    """Arrival and service rates of every cluster for placement ``c``.

    With ``cooperative=False`` the remote mode is disabled: requests that
    would have been relayed from another cluster go to the backhaul.
    """
    c = as_placement(c, (params.K, params.m))
    arrivals = params.lam[:, None] * mode_fractions(c, pop)
    if not cooperative:
        arrivals[:, 2] += arrivals[:, 1]
        arrivals[:, 1] = 0.0
    sharing = mean_sharing_counts(params, arrivals) if model is ServiceModel.SHARED_BY_MEAN else None
    mu = service_rates(params, model, sharing)
    return [ClusterRates(*row, *mu) for row in arrivals]
