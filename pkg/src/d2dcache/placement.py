"""Cache placement schemes, an exhaustive oracle and set-function property checks.

Placements are ``(K, m)`` 0/1 arrays. Set-function views use
:class:`~d2dcache.core.GroundSetElement` pairs. Objectives are evaluated on
batches of placements ``(B, K, m)`` so that the greedy step and the
exhaustive search stay vectorised.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    GroundSetElement,
    SystemParams,
    empty_placement,
    is_independent,
    preference_order,
)
from .rates import ServiceModel, mode_fractions

__all__ = [
    "Objective",
    "BaselineUnstableError",
    "InstanceTooLargeError",
    "GreedyStep",
    "GreedyTrace",
    "PropertyReport",
    "evaluate_objective",
    "cpf_placement",
    "random_placement",
    "greedy_caching",
    "brute_force_optimal",
    "reduction_ratio",
    "supermodularity_check",
    "monotonicity_check",
    "matroid_check",
]


class Objective(enum.Enum):
    MPSQ_DELAY = "mpsq-delay"
    AVG_DOWNLOAD_TIME = "avg-download-time"


class BaselineUnstableError(RuntimeError):
    pass


class InstanceTooLargeError(ValueError):
    pass


def evaluate_objective(objective: Objective, c, pop, params: SystemParams,
                       model: ServiceModel = ServiceModel.FIXED_AVERAGE) -> np.ndarray:
    """Objective value for one placement or a batch ``(..., K, m)``.

    Unstable placements score ``inf`` under ``MPSQ_DELAY``.
    """
    frac = mode_fractions(c, pop)
    lam = params.lam
    weights = lam / lam.sum()
    if objective is Objective.AVG_DOWNLOAD_TIME:
        return np.einsum("...kj,j,k->...", frac, params.tau, weights)[()]

    arr = lam[:, None] * frac
    mu = np.broadcast_to(1.0 / params.tau, arr.shape[:-2] + (3,)).copy()
    if model is ServiceModel.SHARED_BY_MEAN:
        lam_bar = lam.sum() / params.K
        for j in (1, 2):
            share = arr[..., j].sum(-1) / lam_bar
            mu[..., j] = np.where(share > 0, mu[..., j] / np.where(share > 0, share, 1.0), mu[..., j])
    mu = mu[..., None, :]
    rho = (arr / mu).sum(-1)
    second = (arr / mu**2).sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dk = np.where(lam > 0, rho / np.where(lam > 0, lam, 1.0), 0.0) + second / (1.0 - rho)
    dk = np.where(rho >= 1.0, np.inf, dk)
    return ((dk * weights).sum(-1))[()]


def cpf_placement(params: SystemParams, pop=None) -> np.ndarray:
    """Each cluster caches its ``N`` most popular files.

    Ties (only possible with ``beta = 0``) follow the cluster's own rank
    order, so cluster ``k`` caches files ``s_k + 1 ... s_k + N`` (cyclically)
    for every ``beta``.
    """
    c = empty_placement(params.K, params.m)
    for k in range(1, params.K + 1):
        order = preference_order(k, params.m, params.m0)
        if pop is not None:
            # stable sort on -p keeps rank order among equal probabilities
            order = order[np.argsort(-np.asarray(pop)[k - 1][order], kind="stable")]
        c[k - 1, order[: params.capacity]] = 1
    return c


def random_placement(params: SystemParams, seed=None) -> np.ndarray:
    """Each cluster caches ``N`` distinct files drawn uniformly at random."""
    rng = np.random.default_rng(seed)
    c = empty_placement(params.K, params.m)
    for k in range(params.K):
        c[k, rng.choice(params.m, size=params.capacity, replace=False)] = 1
    return c


@dataclass(frozen=True)
class GreedyStep:
    cluster: int
    file: int
    marginal: float


@dataclass
class GreedyTrace:
    steps: list[GreedyStep]
    final_placement: np.ndarray
    objective_values: list[float] = field(default_factory=list)

    @property
    def marginals(self) -> np.ndarray:
        return np.array([s.marginal for s in self.steps])


def greedy_caching(params: SystemParams, pop, objective: Objective = Objective.MPSQ_DELAY,
                   model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                   fallback: Optional[Objective] = None, rtol: float = 1e-12) -> GreedyTrace:
    """Greedy cache filling.

    Each iteration tries every (cluster, file) pair that is not yet cached
    in a cluster with a free slot, and commits the pair with the largest
    objective reduction. Candidates within ``rtol`` of the best reduction
    count as ties and the lowest cluster, then lowest file, wins. Runs until
    every cluster holds ``min(N, m)`` files.

    Raises
    ------
    BaselineUnstableError
        If the empty placement is unstable under ``objective`` and no
        ``fallback`` objective is given. With a fallback, steps use the
        fallback objective until the current placement becomes stable.
    """
    K, m, cap = params.K, params.m, params.capacity
    c = empty_placement(K, m)
    current = float(evaluate_objective(objective, c, pop, params, model))
    if not np.isfinite(current) and fallback is None:
        raise BaselineUnstableError(
            f"{objective.value} is infinite at the empty placement; pass a fallback objective")
    steps: list[GreedyStep] = []
    values = [current]
    eye = np.eye(K * m, dtype=np.int8).reshape(K * m, K, m)
    while c.sum() < cap * K:
        active = objective if np.isfinite(current) else fallback
        base = current if active is objective else float(
            evaluate_objective(active, c, pop, params, model))
        open_rows = c.sum(axis=1) < cap
        allowed = ((c == 0) & open_rows[:, None]).ravel()
        idx = np.flatnonzero(allowed)
        cand = c[None, :, :] + eye[idx]
        vals = evaluate_objective(active, cand, pop, params, model)
        marg = base - vals
        marg = np.where(np.isnan(marg), -np.inf, marg)
        best = marg.max()
        if np.isfinite(best):
            tol = rtol * max(abs(best), abs(base))
            pick = idx[np.flatnonzero(marg >= best - tol)[0]]
        else:
            pick = idx[0]
        k, f = divmod(int(pick), m)
        c[k, f] = 1
        current = float(evaluate_objective(objective, c, pop, params, model))
        chosen = float(marg[np.searchsorted(idx, pick)])
        steps.append(GreedyStep(k + 1, f + 1, chosen))
        values.append(current)
    return GreedyTrace(steps, c, values)


def _row_patterns(m: int, cap: int) -> np.ndarray:
    rows = []
    for size in range(cap + 1):
        for combo in itertools.combinations(range(m), size):
            r = np.zeros(m, dtype=np.int8)
            r[list(combo)] = 1
            rows.append(r)
    return np.array(rows, dtype=np.int8)


def brute_force_optimal(params: SystemParams, pop, objective: Objective = Objective.MPSQ_DELAY,
                        model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                        max_placements: int = 10**6, chunk: int = 20000):
    """Exhaustive minimiser of ``objective`` over every feasible placement.

    Every row with at most ``min(N, m)`` cached files is enumerated, so the
    search does not rely on monotonicity. Among optimal placements (within
    a relative 1e-12), the lexicographically largest flattened matrix is
    returned, which favours low cluster and file indices.

    Returns
    -------
    placement : ndarray
    value : float

    Raises
    ------
    InstanceTooLargeError
        If the number of feasible placements exceeds ``max_placements``.
    """
    K, m, cap = params.K, params.m, params.capacity
    per_row = sum(math.comb(m, i) for i in range(cap + 1))
    total = per_row**K
    if total > max_placements:
        raise InstanceTooLargeError(
            f"{total} placements to enumerate exceeds the limit of {max_placements}")
    rows = _row_patterns(m, cap)
    best_val = np.inf
    best: list[np.ndarray] = []
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total))
        digits = np.stack([(ids // per_row**(K - 1 - k)) % per_row for k in range(K)], axis=1)
        batch = rows[digits]
        vals = evaluate_objective(objective, batch, pop, params, model)
        vmin = float(vals.min())
        improved = vmin < best_val - 1e-12 * abs(best_val) if np.isfinite(best_val) else vmin < best_val
        if improved:
            best_val = vmin
            best = []
        tol = 1e-12 * abs(best_val) if np.isfinite(best_val) else 0.0
        for b in np.flatnonzero(vals <= best_val + tol):
            best.append(batch[b].copy())
    if not best:
        raise BaselineUnstableError("objective is infinite for every feasible placement")
    winner = max(best, key=lambda a: tuple(a.ravel()))
    return winner, best_val


def reduction_ratio(params: SystemParams, pop, greedy_placement, optimal_placement,
                    objective: Objective = Objective.AVG_DOWNLOAD_TIME,
                    model: ServiceModel = ServiceModel.FIXED_AVERAGE) -> float:
    """``(g(empty) - g(greedy)) / (g(empty) - g(opt))``; 1.0 when nothing can be gained."""
    g = lambda c: float(evaluate_objective(objective, c, pop, params, model))  # noqa: E731
    g0 = g(empty_placement(params.K, params.m))
    denom = g0 - g(optimal_placement)
    if denom <= 0:
        return 1.0
    return (g0 - g(greedy_placement)) / denom


@dataclass
class PropertyReport:
    """Outcome of a sampled set-function property check."""

    samples: int
    violations: int
    max_violation: float
    witnesses: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _random_independent(rng, K: int, m: int, cap: int, room_in: Optional[int] = None):
    """Random feasible placement; cluster ``room_in`` (0-based) is kept below capacity."""
    c = empty_placement(K, m)
    for k in range(K):
        limit = cap - 1 if k == room_in else cap
        size = int(rng.integers(0, limit + 1)) if limit > 0 else 0
        if size:
            c[k, rng.choice(m, size=size, replace=False)] = 1
    return c


def supermodularity_check(objective: Objective, params: SystemParams, pop, samples: int = 10**4,
                          seed=0, model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                          atol: float = 1e-12, max_witnesses: int = 20) -> PropertyReport:
    """Sample ``A ⊆ B`` and ``x ∉ B`` and test ``g(A+x) - g(A) <= g(B+x) - g(B)``.

    ``B`` is a random feasible placement with room for ``x`` in its
    cluster, and ``A`` keeps each element of ``B`` with probability 1/2.
    Triples where any of the four values is infinite are skipped and not
    counted as samples.
    """
    if params.K > 4 or params.m > 12:
        raise InstanceTooLargeError("supermodularity sampling is meant for K <= 4, m <= 12")
    rng = np.random.default_rng(seed)
    K, m, cap = params.K, params.m, params.capacity
    if cap == 0:
        return PropertyReport(0, 0, 0.0)
    report = PropertyReport(0, 0, 0.0)
    batch = []
    triples = []
    while len(triples) < samples:
        k = int(rng.integers(K))
        b = _random_independent(rng, K, m, cap, room_in=k)
        free = np.flatnonzero(b[k] == 0)
        f = int(rng.choice(free))
        a = b * (rng.random(b.shape) < 0.5)
        ax, bx = a.copy(), b.copy()
        ax[k, f] = 1
        bx[k, f] = 1
        triples.append((a, b, (k + 1, f + 1)))
        batch.extend([a, ax, b, bx])
    vals = evaluate_objective(objective, np.array(batch), pop, params, model).reshape(-1, 4)
    for (a, b, x), (ga, gax, gb, gbx) in zip(triples, vals):
        if not np.all(np.isfinite([ga, gax, gb, gbx])):
            continue
        report.samples += 1
        excess = (gax - ga) - (gbx - gb)
        scale = max(abs(ga), abs(gb), 1.0)
        if excess > atol * scale:
            report.violations += 1
            report.max_violation = max(report.max_violation, float(excess))
            if len(report.witnesses) < max_witnesses:
                report.witnesses.append((a, b, x, float(excess)))
    return report


def monotonicity_check(objective: Objective, params: SystemParams, pop, samples: int = 10**4,
                       seed=0, model: ServiceModel = ServiceModel.FIXED_AVERAGE,
                       atol: float = 1e-12, max_witnesses: int = 20) -> PropertyReport:
    """Sample feasible ``A`` and ``x`` with ``A + x`` feasible; test ``g(A + x) <= g(A)``.

    ``x`` may already be in ``A`` (a no-op that must give a zero
    difference). Pairs with an infinite ``g(A)`` are skipped.
    """
    rng = np.random.default_rng(seed)
    K, m, cap = params.K, params.m, params.capacity
    report = PropertyReport(0, 0, 0.0)
    if cap == 0:
        return report
    pairs, batch = [], []
    for _ in range(samples):
        k = int(rng.integers(K))
        a = _random_independent(rng, K, m, cap, room_in=k)
        f = int(rng.integers(m))
        ax = a.copy()
        ax[k, f] = 1
        pairs.append((a, (k + 1, f + 1)))
        batch.extend([a, ax])
    vals = evaluate_objective(objective, np.array(batch), pop, params, model).reshape(-1, 2)
    for (a, x), (ga, gax) in zip(pairs, vals):
        if not np.isfinite(ga):
            continue
        report.samples += 1
        excess = gax - ga
        if excess > atol * max(abs(ga), 1.0):
            report.violations += 1
            report.max_violation = max(report.max_violation, float(excess))
            if len(report.witnesses) < max_witnesses:
                report.witnesses.append((a, x, float(excess)))
    return report


@dataclass
class MatroidReport:
    independent_sets: int
    downward_closed: bool
    exchange: bool
    counterexample: Optional[tuple] = None

    @property
    def ok(self) -> bool:
        return self.downward_closed and self.exchange


def matroid_check(K: int, m: int, N: int) -> MatroidReport:
    """Exhaustively verify the independence axioms of the per-cluster capacity family.

    Enumerates all ``2**(K*m)`` subsets of the ground set, so keep
    ``K * m`` small (16 elements gives 65536 subsets).
    """
    ground = [GroundSetElement(k, f) for k in range(1, K + 1) for f in range(1, m + 1)]
    if len(ground) > 16:
        raise InstanceTooLargeError("exhaustive matroid check limited to 16 ground elements")
    n = len(ground)
    masks = range(1 << n)

    def members(mask):
        return [ground[i] for i in range(n) if mask >> i & 1]

    indep = {mask for mask in masks if is_independent(members(mask), N)}
    report = MatroidReport(len(indep), True, True)
    if 0 not in indep:
        report.downward_closed = False
        report.counterexample = ("empty set dependent",)
        return report
    for mask in indep:
        sub = mask
        while sub:
            sub = (sub - 1) & mask
            if sub not in indep:
                report.downward_closed = False
                report.counterexample = (members(mask), members(sub))
                return report
    popcount = {mask: bin(mask).count("1") for mask in indep}
    for a in indep:
        for b in indep:
            if popcount[b] <= popcount[a]:
                continue
            diff = b & ~a
            if not any((diff >> i & 1) and (a | 1 << i) in indep for i in range(n)):
                report.exchange = False
                report.counterexample = (members(a), members(b))
                return report
    return report

