"""Simulated-annealing baselines for bipartitioning and the TSP.

Both use Metropolis acceptance and geometric cooling ``T <- cooling * T``
after each stage of ``stage_length`` moves.  A run stops once
``freeze_stages`` consecutive stages accept fewer than ``min_accept`` of
their moves without improving the best-so-far, or when ``max_moves`` is hit.
Accepted moves with zero cost change do not count towards the ratio, so a
plateau walk at a vanishing temperature still freezes.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import brentq

from .graphs import Graph
from .partition import PartitionState, cutsize, random_balanced
from .rank import RunResult, make_rng
from .tsp import TspInstance, _reverse, tour_length

__all__ = [
    "SaSchedule",
    "calibrate_t0",
    "metropolis",
    "solve_partition_sa",
    "solve_tsp_sa",
    "partition_sa_cost",
    "DEFAULT_IMBALANCE_WEIGHT",
]

DEFAULT_IMBALANCE_WEIGHT = 0.05
TARGET_UPHILL_ACCEPTANCE = 0.8
CALIBRATION_SAMPLES = 1000


@dataclass(frozen=True)
class SaSchedule:
    """Annealing schedule.

    ``t0=None`` calibrates the start temperature from the initial state;
    ``stage_length=None`` picks the problem default (16n moves for
    partitioning, 32n^2 for the TSP) times ``stage_multiplier``.
    """

    t0: float | None = None
    cooling: float = 0.9
    stage_length: int | None = None
    freeze_stages: int = 5
    min_accept: float = 0.02
    seed: int = 0
    max_moves: int = 0
    stage_multiplier: int = 1

    def __post_init__(self):
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling must lie in (0, 1)")
        if self.stage_length is not None and self.stage_length < 1:
            raise ValueError("stage_length must be >= 1")
        if self.t0 is not None and not (self.t0 >= 0 and math.isfinite(self.t0)):
            raise ValueError("t0 must be a finite non-negative temperature")
        if self.freeze_stages < 1 or not 0.0 <= self.min_accept < 1.0:
            raise ValueError("invalid freeze criterion")
        if self.max_moves < 0 or self.stage_multiplier < 1:
            raise ValueError("invalid move budget")

    def moves_per_stage(self, default: int) -> int:
        base = self.stage_length if self.stage_length is not None else default
        return int(base) * self.stage_multiplier


@njit(cache=True, inline="always")
def _accept(delta, temp, rng):
    if delta <= 0.0:
        return True
    if temp <= 0.0:
        return False
    return rng.random() < math.exp(-delta / temp)


@njit(cache=True)
def _count_accepts(delta, temp, trials, rng):
    hits = 0
    for _ in range(trials):
        if _accept(delta, temp, rng):
            hits += 1
    return hits


def metropolis(delta: float, temp: float, rng: np.random.Generator, trials: int = 1) -> int:
    """Number of accepted proposals out of ``trials`` with cost change ``delta``."""
    return int(_count_accepts(float(delta), float(temp), int(trials), rng))


def calibrate_t0(uphill: np.ndarray, target: float = TARGET_UPHILL_ACCEPTANCE) -> float:
    """Temperature at which the mean Metropolis acceptance of ``uphill`` equals ``target``."""
    uphill = np.asarray(uphill, dtype=np.float64)
    uphill = uphill[uphill > 0]
    if uphill.size == 0:
        return 1.0
    f = lambda t: np.mean(np.exp(-uphill / t)) - target
    hi = uphill.max()
    while f(hi) < 0:
        hi *= 2.0
    return float(brentq(f, uphill.min() * 1e-6, hi, xtol=1e-12 * hi))


def _anneal(stage, t0: float, schedule: SaSchedule, moves_per_stage: int):
    """Drive ``stage(temp, moves) -> (accepted, lo, hi, improved)`` until frozen."""
    temp = t0
    cold = 0
    moves = 0
    trace = []
    k = 0
    while True:
        count = moves_per_stage
        if schedule.max_moves:
            count = min(count, schedule.max_moves - moves)
            if count <= 0:
                break
        accepted, lo, hi, improved = stage(temp, count)
        moves += count
        trace.append((k, lo, hi))
        if accepted < schedule.min_accept * count and not improved:
            cold += 1
        else:
            cold = 0
        if cold >= schedule.freeze_stages:
            break
        temp *= schedule.cooling
        k += 1
    return trace, moves


# ----------------------------------------------------------------------------
# partitioning

def partition_sa_cost(cut: int, imbalance: int, weight: float) -> float:
    """Penalised cost ``cut + weight * imbalance**2``."""
    return cut + weight * imbalance * imbalance


@njit(cache=True)
def _flip_plain(x, indptr, indices, side, g, b):
    s = side[x]
    for k in range(indptr[x], indptr[x + 1]):
        w = indices[k]
        if side[w] == s:
            g[w] -= 1
            b[w] += 1
        else:
            g[w] += 1
            b[w] -= 1
    gx = g[x]
    g[x] = b[x]
    b[x] = gx
    side[x] = 1 - s


@njit(cache=True)
def _part_deltas(samples, indptr, indices, side, g, b, imb, weight, rng):
    n = side.shape[0]
    out = np.empty(samples)
    for k in range(samples):
        x = int(rng.random() * n) % n
        new = imb - 2 if side[x] == 0 else imb + 2
        out[k] = (g[x] - b[x]) + weight * (new * new - imb * imb)
    return out


@njit(cache=True)
def _part_stage(temp, moves, indptr, indices, side, g, b, iscal, weight, best_side, rng):
    # iscal = [cut, imbalance (size0 - size1), best balanced cut]
    n = side.shape[0]
    accepted = 0
    improved = False
    lo = np.inf
    hi = -np.inf
    for _ in range(moves):
        x = int(rng.random() * n) % n
        imb = iscal[1]
        new = imb - 2 if side[x] == 0 else imb + 2
        dcut = g[x] - b[x]
        delta = dcut + weight * (new * new - imb * imb)
        if _accept(delta, temp, rng):
            _flip_plain(x, indptr, indices, side, g, b)
            iscal[0] += dcut
            iscal[1] = new
            if delta != 0.0:
                accepted += 1
            if new == 0 and iscal[0] < iscal[2]:
                iscal[2] = iscal[0]
                best_side[:] = side
                improved = True
        cost = iscal[0] + weight * iscal[1] * iscal[1]
        if cost < lo:
            lo = cost
        if cost > hi:
            hi = cost
    return accepted, lo, hi, improved


def _rebalance(graph: Graph, side, g, b):
    """Greedily flip cheapest vertices off the larger side until balanced."""
    side = side.copy()
    g = g.copy()
    b = b.copy()
    imb = graph.n - 2 * int(np.count_nonzero(side))
    while imb != 0:
        big = 0 if imb > 0 else 1
        cand = np.flatnonzero(side == big)
        x = int(cand[np.argmin(g[cand] - b[cand])])
        _flip_plain(x, graph.indptr, graph.indices, side, g, b)
        imb += -2 if big == 0 else 2
    return side


def solve_partition_sa(graph: Graph, schedule: SaSchedule,
                       imbalance_weight: float = DEFAULT_IMBALANCE_WEIGHT) -> RunResult:
    """Single-vertex-flip annealing with a soft balance penalty.

    Only balanced configurations count towards the best-so-far cutsize.
    """
    if graph.n % 2:
        raise ValueError("balanced bipartition needs an even vertex count")
    if imbalance_weight < 0:
        raise ValueError("imbalance weight must be non-negative")
    start = time.perf_counter()
    rng = make_rng(schedule.seed)
    side = random_balanced(graph.n, rng)
    state = PartitionState(graph, side)  # reused for its (g, b) bookkeeping
    g, b, side = state.g, state.b, state.side
    cut0 = state.cost
    iscal = np.array([cut0, 0, cut0], dtype=np.int64)
    best_side = side.copy()
    args = (graph.indptr, graph.indices, side, g, b)

    if schedule.t0 is None:
        deltas = _part_deltas(CALIBRATION_SAMPLES, *args, 0, float(imbalance_weight), rng)
        t0 = calibrate_t0(deltas)
    else:
        t0 = schedule.t0

    def stage(temp, moves):
        return _part_stage(float(temp), int(moves), *args, iscal, float(imbalance_weight),
                           best_side, rng)

    trace, moves = _anneal(stage, t0, schedule, schedule.moves_per_stage(16 * graph.n))
    final = _rebalance(graph, side, g, b)
    best = int(iscal[2])
    if cutsize(graph, final) < best:
        best_side = final
        best = cutsize(graph, final)
    return RunResult(best_cost=best, best_config=best_side, trace=trace, updates_used=moves,
                     wall_time=time.perf_counter() - start, initial_cost=float(cut0),
                     seed=schedule.seed, method="sa")


# ----------------------------------------------------------------------------
# TSP

@njit(cache=True, inline="always")
def _pick_edges(n, rng):
    while True:
        x = int(rng.random() * n) % n
        y = int(rng.random() * n) % n
        p = min(x, y)
        q = max(x, y)
        if q - p >= 2 and not (p == 0 and q == n - 1):
            return p, q


@njit(cache=True)
def _tsp_deltas(samples, order, dist, rng):
    n = order.shape[0]
    out = np.empty(samples)
    for k in range(samples):
        p, q = _pick_edges(n, rng)
        a = order[p]
        an = order[p + 1]
        c = order[q]
        cn = order[(q + 1) % n]
        out[k] = dist[a, c] + dist[an, cn] - dist[a, an] - dist[c, cn]
    return out


@njit(cache=True)
def _tsp_stage(temp, moves, order, pos, dist, fscal, best_order, rng):
    n = order.shape[0]
    accepted = 0
    improved = False
    lo = np.inf
    hi = -np.inf
    for _ in range(moves):
        p, q = _pick_edges(n, rng)
        a = order[p]
        an = order[p + 1]
        c = order[q]
        cn = order[(q + 1) % n]
        delta = dist[a, c] + dist[an, cn] - dist[a, an] - dist[c, cn]
        if _accept(delta, temp, rng):
            _reverse(order, pos, p + 1, q)
            fscal[0] += delta
            if delta != 0.0:
                accepted += 1
            if fscal[0] < fscal[1]:
                fscal[1] = fscal[0]
                best_order[:] = order
                improved = True
        if fscal[0] < lo:
            lo = fscal[0]
        if fscal[0] > hi:
            hi = fscal[0]
    return accepted, lo, hi, improved


def solve_tsp_sa(instance: TspInstance, schedule: SaSchedule) -> RunResult:
    """Two-change annealing from a random tour."""
    if instance.n < 4:
        raise ValueError("two-change moves need n >= 4")
    start = time.perf_counter()
    rng = make_rng(schedule.seed)
    order = rng.permutation(instance.n).astype(np.int64)
    pos = np.empty_like(order)
    pos[order] = np.arange(instance.n)
    length0 = tour_length(instance, order)
    fscal = np.array([length0, length0])
    best_order = order.copy()

    if schedule.t0 is None:
        t0 = calibrate_t0(_tsp_deltas(CALIBRATION_SAMPLES, order, instance.dist, rng))
    else:
        t0 = schedule.t0

    def stage(temp, moves):
        return _tsp_stage(float(temp), int(moves), order, pos, instance.dist, fscal,
                          best_order, rng)

    trace, moves = _anneal(stage, t0, schedule, schedule.moves_per_stage(32 * instance.n ** 2))
    return RunResult(best_cost=tour_length(instance, best_order), best_config=best_order,
                     trace=trace, updates_used=moves, wall_time=time.perf_counter() - start,
                     initial_cost=length0, seed=schedule.seed, method="sa")
