"""Independent reference implementations used as test oracles.

Plain loops over the model definitions, written without the package's
vectorised helpers so that disagreements point at real bugs.
"""
from __future__ import annotations

import itertools
import math


def shift(k, m0):
    return (k - 1) * m0 // k


def popularity_literal(K, m, m0, beta):
    """Indicator form: rank of file f in cluster k is f - s_k if f > s_k else f + m - s_k."""
    norm = sum(i ** (-beta) for i in range(1, m + 1))
    rows = []
    for k in range(1, K + 1):
        s = shift(k, m0)
        row = []
        for f in range(1, m + 1):
            a = 1 if f > s else 0
            b = 1 - a
            rank = f - s * a + (m - s) * b
            row.append(rank ** (-beta) / norm)
        rows.append(row)
    return rows


def mode_rates_literal(c, P, lam, k):
    """Per-mode arrival rates of cluster k (1-based) by direct summation over files."""
    K, m = len(c), len(c[0])
    lc = rc = bh = 0.0
    for f in range(m):
        p = P[k - 1][f]
        others = sum(c[j][f] for j in range(K) if j != k - 1)
        lc += p * c[k - 1][f]
        rc += p * (1 - c[k - 1][f]) * min(others, 1)
        nowhere = 1
        for j in range(K):
            nowhere *= 1 - c[j][f]
        bh += p * nowhere
    return lam * lc, lam * rc, lam * bh


def delay_literal(lams, mus):
    """Cluster delay written term by term."""
    lam = sum(lams)
    rho = sum(l / u for l, u in zip(lams, mus))
    second = sum(l / u ** 2 for l, u in zip(lams, mus))
    return rho / lam + second / (1 - rho)


def mg1_sojourn(lams, mus):
    """Mean service plus mean wait from the second moment of a hyperexponential service time."""
    lam = sum(lams)
    es = sum(l / lam / u for l, u in zip(lams, mus))
    es2 = sum(l / lam * 2 / u ** 2 for l, u in zip(lams, mus))
    rho = lam * es
    return es + lam * es2 / (2 * (1 - rho))


def network_delay_literal(c, P, lams_k, taus):
    """Request-weighted delay over clusters with fixed mode service rates 1/tau."""
    mus = [1 / t for t in taus]
    total = sum(lams_k)
    acc = 0.0
    for k in range(1, len(c) + 1):
        rates = mode_rates_literal(c, P, lams_k[k - 1], k)
        acc += lams_k[k - 1] * delay_literal(rates, mus)
    return acc / total


def download_time_literal(c, P, lams_k, taus):
    total = sum(lams_k)
    acc = 0.0
    for k in range(1, len(c) + 1):
        lc, rc, bh = mode_rates_literal(c, P, lams_k[k - 1], k)
        acc += lc * taus[0] + rc * taus[1] + bh * taus[2]
    return acc / total


def greedy_literal(K, m, N, objective):
    """Greedy fill: best strictly larger reduction wins, scanning clusters then files in order."""
    c = [[0] * m for _ in range(K)]
    steps = []
    for _ in range(K * min(N, m)):
        base = objective(c)
        best = None
        for k in range(K):
            if sum(c[k]) >= N:
                continue
            for f in range(m):
                if c[k][f]:
                    continue
                c[k][f] = 1
                gain = base - objective(c)
                c[k][f] = 0
                if best is None or gain > best[0] + 1e-12 * max(abs(best[0]), abs(base)):
                    best = (gain, k, f)
        _, k, f = best
        c[k][f] = 1
        steps.append((k + 1, f + 1))
    return c, steps


def brute_force_literal(K, m, N, objective):
    """Minimum objective over every placement with at most N files per cluster."""
    rows = [r for size in range(min(N, m) + 1) for r in itertools.combinations(range(m), size)]
    best = math.inf
    for combo in itertools.product(rows, repeat=K):
        c = [[1 if f in r else 0 for f in range(m)] for r in combo]
        best = min(best, objective(c))
    return best


def cached_sets_cpf(K, m, m0, N):
    """Cluster k caches files s_k + 1 .. s_k + N, wrapping past m."""
    return [{(shift(k, m0) + i) % m + 1 for i in range(min(N, m))} for k in range(1, K + 1)]
