"""Domain parameters, per-cluster Zipf popularity and cache placements.

All public interfaces speak 1-based cluster and file indices. Internally,
placements and popularity matrices are plain ``numpy`` arrays of shape
``(K, m)`` where row ``k - 1`` belongs to cluster ``k`` and column ``f - 1``
to file ``f``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

import numpy as np

__all__ = [
    "ParameterError",
    "SystemParams",
    "GroundSetElement",
    "PlacementViolation",
    "cluster_shift",
    "zipf_popularity",
    "shifted_zipf",
    "preference_order",
    "empty_placement",
    "full_placement",
    "as_placement",
    "validate_placement",
    "placement_to_set",
    "set_to_placement",
    "is_independent",
]


class ParameterError(ValueError):
    """Raised when a parameter set violates a hard model constraint."""


@dataclass(frozen=True)
class SystemParams:
    """Scalar network and content parameters.

    Rates are in bits/second, file sizes in bits, powers in watts. Use
    :func:`d2dcache.experiments.config.params_from_mapping` to build one from
    Mbps/Mbit/dBm values.

    ``N`` and ``y`` default to ``y * M`` and ``n // K``; both can be
    overridden independently. ``r_cell_avg`` defaults to ``r_cell``.
    """

    n: int
    K: int
    m: int
    m0: int
    M: int
    beta: float
    mean_file_size: float
    lambda_per_cluster: tuple[float, ...]
    r_d2d: float
    r_cell: float
    r_bh_avg: float
    r_cell_avg: Optional[float] = None
    N: Optional[int] = None
    y: Optional[int] = None
    p_lc: float = 0.1
    p_rc: float = 0.2
    k1_rate_ratio: Optional[float] = None
    rho_scale: float = 1.0

    def __post_init__(self):
        lam = self.lambda_per_cluster
        if np.isscalar(lam):
            lam = (float(lam),) * self.K
        object.__setattr__(self, "lambda_per_cluster", tuple(float(v) for v in lam))
        if self.r_cell_avg is None:
            object.__setattr__(self, "r_cell_avg", float(self.r_cell))
        if self.y is None:
            object.__setattr__(self, "y", self.n // self.K if self.K > 0 else 0)
        if self.N is None:
            object.__setattr__(self, "N", self.y * self.M)
        if self.k1_rate_ratio is None:
            object.__setattr__(self, "k1_rate_ratio", self.r_cell_avg / self.r_d2d)
        self.validate()

    def validate(self) -> None:
        if self.K < 1 or self.m < 1 or self.n < 1:
            raise ParameterError("n, K and m must be positive")
        if len(self.lambda_per_cluster) != self.K:
            raise ParameterError(
                f"lambda_per_cluster has {len(self.lambda_per_cluster)} entries, expected K={self.K}")
        if any(v < 0 for v in self.lambda_per_cluster):
            raise ParameterError("arrival rates must be nonnegative")
        if not 0 <= self.m0 <= self.m:
            raise ParameterError(f"m0={self.m0} must lie in [0, m={self.m}]")
        if self.beta < 0:
            raise ParameterError(f"beta={self.beta} must be >= 0")
        if self.N < 0 or self.M < 0:
            raise ParameterError("cache sizes must be nonnegative")
        if self.mean_file_size <= 0:
            raise ParameterError("mean_file_size must be positive")
        for name in ("r_d2d", "r_cell", "r_cell_avg", "r_bh_avg"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if not self.r_d2d > self.r_cell_avg > self.r_bh_avg:
            raise ParameterError(
                "rate ordering R_D > R_WL > R_BH violated: "
                f"{self.r_d2d:g} / {self.r_cell_avg:g} / {self.r_bh_avg:g}")
        if self.M >= self.m:
            warnings.warn(f"per-user cache M={self.M} >= library size m={self.m}; "
                          "caching is trivial", stacklevel=3)
        if self.N > self.m:
            warnings.warn(f"cluster cache N={self.N} exceeds m={self.m}; "
                          "every cluster can hold the whole library", stacklevel=3)

    @property
    def total_lambda(self) -> float:
        return float(sum(self.lambda_per_cluster))

    @property
    def lam(self) -> np.ndarray:
        return np.asarray(self.lambda_per_cluster, dtype=float)

    @property
    def capacity(self) -> int:
        """Usable slots per cluster, ``min(N, m)``."""
        return min(self.N, self.m)

    @property
    def tau(self) -> np.ndarray:
        """Mean service times ``(S/R_D, S/R_WL, S/R_BH)`` in seconds."""
        return self.mean_file_size / np.array([self.r_d2d, self.r_cell_avg, self.r_bh_avg])

    def evolve(self, **changes) -> "SystemParams":
        """Return a copy with ``changes`` applied.

        Derived defaults (``N``, ``y``, ``k1_rate_ratio``) are recomputed
        unless given explicitly; a scalar ``lambda_per_cluster`` is
        broadcast to the (possibly new) cluster count.
        """
        current = {f: getattr(self, f) for f in self.__dataclass_fields__}
        if "K" in changes or "n" in changes:
            current["y"] = None
            if "lambda_per_cluster" not in changes:
                vals = set(self.lambda_per_cluster)
                if len(vals) != 1:
                    raise ParameterError("cannot change K with heterogeneous arrival rates")
                current["lambda_per_cluster"] = vals.pop()
        if {"K", "n", "M", "y"} & changes.keys() and "N" not in changes:
            current["N"] = None
        if {"r_d2d", "r_cell", "r_cell_avg"} & changes.keys() and "k1_rate_ratio" not in changes:
            current["k1_rate_ratio"] = None
        if "r_cell" in changes and "r_cell_avg" not in changes:
            current["r_cell_avg"] = None
        current.update(changes)
        return SystemParams(**current)

    def with_cluster_size(self, y: int) -> "SystemParams":
        """Regroup the ``n`` users into clusters of ``y`` users (``K = n // y``)."""
        return self.evolve(K=max(self.n // y, 1), y=y)


class GroundSetElement(NamedTuple):
    """Placement of ``file`` into the cache of ``cluster`` (both 1-based)."""

    cluster: int
    file: int


def cluster_shift(k: int, m0: int) -> int:
    """Rank offset of cluster ``k``: ``floor((k - 1) * m0 / k)``.

    Cluster ``k``'s most popular file is ``cluster_shift(k, m0) + 1``.
    """
    return ((k - 1) * m0) // k


def shifted_zipf(K: int, m: int, m0: int, beta: float) -> np.ndarray:
    """Popularity matrix where cluster ``k`` follows Zipf(beta) rotated by its shift.

    File ``f`` has rank ``f - s_k`` in cluster ``k`` when ``f > s_k`` and
    ``f + m - s_k`` otherwise, so each row is a cyclic rotation of the base
    Zipf row and shares its normaliser.
    """
    ranks = np.arange(1, m + 1, dtype=float)
    base = ranks ** (-float(beta))
    base /= base.sum()
    pop = np.empty((K, m))
    for k in range(1, K + 1):
        pop[k - 1] = np.roll(base, cluster_shift(k, m0))
    return pop


def zipf_popularity(params: SystemParams) -> np.ndarray:
    """``K x m`` request probabilities for ``params``."""
    return shifted_zipf(params.K, params.m, params.m0, params.beta)


def preference_order(k: int, m: int, m0: int) -> np.ndarray:
    """0-based file columns of cluster ``k`` sorted from most to least popular."""
    return (cluster_shift(k, m0) + np.arange(m)) % m


def empty_placement(K: int, m: int) -> np.ndarray:
    return np.zeros((K, m), dtype=np.int8)


def full_placement(K: int, m: int) -> np.ndarray:
    return np.ones((K, m), dtype=np.int8)


def as_placement(c, shape: Optional[tuple[int, int]] = None) -> np.ndarray:
    """Coerce ``c`` to an ``int8`` 0/1 matrix, checking entries and shape."""
    arr = np.asarray(c)
    if arr.ndim != 2:
        raise ValueError(f"placement must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"placement shape {arr.shape} does not match {tuple(shape)}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("placement entries must be exactly 0 or 1")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class PlacementViolation:
    """Clusters whose cache holds more than ``N`` files."""

    excess: dict[int, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.excess

    def __bool__(self) -> bool:
        return self.ok


def validate_placement(c, params: SystemParams) -> PlacementViolation:
    """Check the per-cluster capacity constraint.

    Returns a report that is truthy when the placement is feasible;
    otherwise ``report.excess`` maps 1-based cluster index to the number of
    files over capacity.
    """
    arr = as_placement(c, (params.K, params.m))
    sums = arr.sum(axis=1)
    excess = {k + 1: int(s - params.N) for k, s in enumerate(sums) if s > params.N}
    return PlacementViolation(excess)


def is_independent(elements: Iterable[GroundSetElement], N: int) -> bool:
    """Whether a ground-set subset respects the uniform partition matroid with cap ``N``."""
    counts: dict[int, int] = {}
    for e in elements:
        counts[e.cluster] = counts.get(e.cluster, 0) + 1
    return all(v <= N for v in counts.values())


def placement_to_set(c) -> frozenset[GroundSetElement]:
    arr = as_placement(c)
    ks, fs = np.nonzero(arr)
    return frozenset(GroundSetElement(int(k) + 1, int(f) + 1) for k, f in zip(ks, fs))


def set_to_placement(elements: Iterable[GroundSetElement], K: int, m: int) -> np.ndarray:
    arr = empty_placement(K, m)
    for k, f in elements:
        if not (1 <= k <= K and 1 <= f <= m):
            raise ValueError(f"element {(k, f)} outside {K} clusters x {m} files")
        arr[k - 1, f - 1] = 1
    return arr

