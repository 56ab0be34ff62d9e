"""Exact oracles for small instances: balanced-bipartition enumeration and Held-Karp."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numba import njit

from .errors import CapacityError
from .graphs import Graph
from .tsp import TspInstance, tour_length

__all__ = ["ExactResult", "exact_partition", "exact_tsp", "MAX_PARTITION_N", "MAX_TSP_N"]

MAX_PARTITION_N = 24
MAX_TSP_N = 18


@dataclass(frozen=True, eq=False)
class ExactResult:
    optimum: float
    witness: np.ndarray
    nodes_explored: int


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def _enumerate_cuts(adjmask, n):
    # vertex 0 is fixed on side 1; the other half - 1 members of side 1 run
    # over all (n-1)-bit masks of that popcount (Gosper's hack)
    half = n // 2
    k = half - 1
    full = (1 << n) - 1
    best = 1 << 62
    best_set = 0
    visited = 0
    if k == 0:
        sub = 0
        last = 0
    else:
        sub = (1 << k) - 1
        last = sub << (n - 1 - k)
    while True:
        s = (sub << 1) | 1
        outside = full & ~s
        cut = 0
        for i in range(n):
            if (s >> i) & 1:
                cut += _popcount(adjmask[i] & outside)
        visited += 1
        if cut < best:
            best = cut
            best_set = s
        if sub == last:
            break
        c = sub & -sub
        r = sub + c
        sub = (((r ^ sub) >> 2) // c) | r
    return best, best_set, visited


def exact_partition(graph: Graph) -> ExactResult:
    """Minimum balanced cutsize by enumerating every bipartition once."""
    n = graph.n
    if n % 2:
        raise ValueError("balanced bipartition needs an even vertex count")
    if n > MAX_PARTITION_N:
        raise CapacityError(f"exact partitioning limited to n <= {MAX_PARTITION_N}, got {n}")
    adjmask = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in graph.neighbors(i):
            adjmask[i] |= 1 << int(j)
    best, best_set, visited = _enumerate_cuts(adjmask, n)
    side = np.array([(best_set >> i) & 1 for i in range(n)], dtype=np.int8)
    assert visited == comb(n - 1, n // 2 - 1)
    return ExactResult(int(best), side, int(visited))


@njit(cache=True)
def _held_karp(dist):
    # city 0 is the fixed start; subsets range over cities 1..n-1
    n = dist.shape[0]
    m = n - 1
    size = 1 << m
    dp = np.full((size, m), np.inf)
    parent = np.full((size, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = dist[0, j + 1]
    explored = 0
    for mask in range(1, size):
        for j in range(m):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur == np.inf:
                continue
            for k in range(m):
                if (mask >> k) & 1:
                    continue
                nxt = mask | (1 << k)
                cand = cur + dist[j + 1, k + 1]
                explored += 1
                if cand < dp[nxt, k]:
                    dp[nxt, k] = cand
                    parent[nxt, k] = j
    full = size - 1
    best = np.inf
    last = -1
    for j in range(m):
        cand = dp[full, j] + dist[j + 1, 0]
        if cand < best:
            best = cand
            last = j
    tour = np.empty(n, dtype=np.int64)
    tour[0] = 0
    mask = full
    j = last
    for p in range(n - 1, 0, -1):
        tour[p] = j + 1
        pj = parent[mask, j]
        mask ^= 1 << j
        j = pj
    return best, tour, explored


def exact_tsp(instance: TspInstance) -> ExactResult:
    """Optimal tour by the Held-Karp subset dynamic programme."""
    n = instance.n
    if n > MAX_TSP_N:
        raise CapacityError(f"Held-Karp limited to n <= {MAX_TSP_N}, got {n}")
    if n <= 3:
        tour = np.arange(n)
        return ExactResult(tour_length(instance, tour), tour, 1)
    _, tour, explored = _held_karp(instance.dist)
    return ExactResult(tour_length(instance, tour), tour, int(explored))
