"""Extremal optimisation for balanced graph bipartitioning.

Each vertex carries ``g`` (edges to its own side) and ``b`` (edges across);
its fitness is ``g / (g + b)``, or 1 for an isolated vertex.  One update
picks a vertex ``u`` by fitness rank, keeps drawing ranks until it hits a
vertex ``v`` on the other side, and swaps the two.

Exact ranking keeps vertices in buckets of equal fitness, ordered worst
first.  A sampled rank falls in one bucket and a member of that bucket is
picked uniformly, which is the same as ordering ties randomly.
"""
from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np
from numba import njit

from .graphs import Graph
from .rank import (EoConfig, RankSelector, RunResult, SelectionMode, draw_rank,
                   heap_build, heap_update, make_rng, run_eo)

__all__ = [
    "PartitionState",
    "greedy_init",
    "random_balanced",
    "cutsize",
    "vertex_fitness",
    "eo_swap_step",
    "solve_partition_eo",
    "write_partition",
    "read_partition",
]

_EXACT = 0
_HEAP = 1
# rejection draws for the second vertex before sampling the conditional law directly
REDRAW_LIMIT = 64


def cutsize(graph: Graph, side) -> int:
    """Number of edges whose endpoints lie on different sides."""
    side = np.asarray(side)
    e = graph.edges()
    return int(np.count_nonzero(side[e[:, 0]] != side[e[:, 1]]))


def _check_even(graph: Graph):
    if graph.n % 2:
        raise ValueError(f"balanced bipartition needs an even vertex count, got {graph.n}")


def greedy_init(graph: Graph, rng: np.random.Generator | int, start: int | None = None) -> np.ndarray:
    """Grow side 0 breadth-first from a random vertex until it holds n/2 vertices.

    Neighbours are visited in ascending order.  When the frontier empties,
    growth restarts from a uniformly chosen unvisited vertex.
    """
    _check_even(graph)
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    n, half = graph.n, graph.n // 2
    side = np.ones(n, dtype=np.int8)
    visited = np.zeros(n, dtype=bool)
    taken = 0
    seed_vertex = int(rng.integers(n)) if start is None else int(start)
    while taken < half:
        queue = deque([seed_vertex])
        visited[seed_vertex] = True
        side[seed_vertex] = 0
        taken += 1
        while queue and taken < half:
            x = queue.popleft()
            for w in graph.neighbors(x):
                if not visited[w]:
                    visited[w] = True
                    side[w] = 0
                    taken += 1
                    queue.append(w)
                    if taken == half:
                        break
        if taken < half:
            unvisited = np.flatnonzero(~visited)
            seed_vertex = int(unvisited[rng.integers(unvisited.shape[0])])
    return side


def random_balanced(n: int, rng: np.random.Generator) -> np.ndarray:
    side = np.zeros(n, dtype=np.int8)
    side[rng.permutation(n)[: n // 2]] = 1
    return side


def _fitness_levels(degrees: np.ndarray):
    """Map every reachable (degree, g) pair to its fitness level, worst first."""
    ds = sorted(set(int(d) for d in degrees))
    values = sorted({Fraction(gv, d) if d else Fraction(1) for d in ds for gv in range(d + 1)})
    index = {v: k for k, v in enumerate(values)}
    dmax = ds[-1]
    deg_start = np.zeros(dmax + 2, dtype=np.int64)
    deg_start[1:] = np.cumsum(np.arange(1, dmax + 2))
    level_of = np.full(deg_start[-1], -1, dtype=np.int64)
    for d in ds:
        for gv in range(d + 1):
            level_of[deg_start[d] + gv] = index[Fraction(gv, d) if d else Fraction(1)]
    return len(values), deg_start, level_of


# ----------------------------------------------------------------------------
# kernels

@njit(cache=True, inline="always")
def _lam(g, d):
    return g / d if d > 0 else 1.0


@njit(cache=True)
def _reposition(x, d, gx, old_side, side, mode, level_of, deg_start, members, count, scount,
                where, vlevel, heap, hpos, hkey, htie, rng):
    if mode == 0:
        new = level_of[deg_start[d] + gx]
        old = vlevel[x]
        scount[old_side, old] -= 1
        scount[side[x], new] += 1
        if new == old:
            return
        s = where[x]
        last = members[old, count[old] - 1]
        members[old, s] = last
        where[last] = s
        count[old] -= 1
        members[new, count[new]] = x
        where[x] = count[new]
        count[new] += 1
        vlevel[x] = new
    else:
        lam = _lam(gx, d)
        if lam != hkey[x]:
            heap_update(heap, hpos, hkey, htie, x, lam, rng.random())


@njit(cache=True)
def _flip(x, indptr, indices, side, g, b, scal, mode, level_of, deg_start, members,
          count, scount, where, vlevel, heap, hpos, hkey, htie, rng):
    s = side[x]
    scal[0] += g[x] - b[x]
    for k in range(indptr[x], indptr[x + 1]):
        w = indices[k]
        if side[w] == s:
            g[w] -= 1
            b[w] += 1
        else:
            g[w] += 1
            b[w] -= 1
        _reposition(w, indptr[w + 1] - indptr[w], g[w], side[w], side, mode, level_of,
                    deg_start, members, count, scount, where, vlevel, heap, hpos, hkey, htie, rng)
    gx = g[x]
    g[x] = b[x]
    b[x] = gx
    side[x] = 1 - s
    _reposition(x, indptr[x + 1] - indptr[x], g[x], s, side, mode, level_of, deg_start,
                members, count, scount, where, vlevel, heap, hpos, hkey, htie, rng)


@njit(cache=True)
def _select(r, mode, members, count, heap, rng):
    if mode == 1:
        return heap[r - 1]
    cum = 0
    for k in range(count.shape[0]):
        c = count[k]
        if cum + c >= r:
            j = int(rng.random() * c)
            if j >= c:
                j = c - 1
            return members[k, j]
        cum += c
    return -1


@njit(cache=True)
def _select_opposite(s_u, probs, side, mode, members, count, scount, heap, rng):
    # exact draw from P(rank) restricted to vertices not on side s_u
    other = 1 - s_u
    if mode == 1:
        n = heap.shape[0]
        total = 0.0
        first = -1
        for k in range(n):
            if side[heap[k]] == other:
                total += probs[k]
                if first < 0:
                    first = heap[k]
        if total == 0.0:
            return first
        u = rng.random() * total
        acc = 0.0
        last = first
        for k in range(n):
            if side[heap[k]] == other:
                last = heap[k]
                acc += probs[k]
                if acc > u:
                    break
        return last
    nlev = count.shape[0]
    weights = np.zeros(nlev)
    cum = 0
    total = 0.0
    first = -1
    for k in range(nlev):
        c = count[k]
        if c > 0:
            if scount[other, k] > 0:
                if first < 0:
                    first = k
                mass = 0.0
                for r in range(cum, cum + c):
                    mass += probs[r]
                weights[k] = mass * scount[other, k] / c
                total += weights[k]
            cum += c
    pick = first
    if total > 0.0:
        # total == 0 only when the tail underflows: tau -> infinity limit
        u = rng.random() * total
        acc = 0.0
        for k in range(nlev):
            if weights[k] > 0.0:
                pick = k
                acc += weights[k]
                if acc > u:
                    break
    target = int(rng.random() * scount[other, pick])
    for j in range(count[pick]):
        x = members[pick, j]
        if side[x] == other:
            if target == 0:
                return x
            target -= 1
    return -1


@njit(cache=True)
def _draw_pair(cdf, probs, side, mode, members, count, scount, heap, rng):
    u = _select(draw_rank(cdf, rng), mode, members, count, heap, rng)
    for _ in range(REDRAW_LIMIT):
        v = _select(draw_rank(cdf, rng), mode, members, count, heap, rng)
        if side[v] != side[u]:
            return u, v
    return u, _select_opposite(side[u], probs, side, mode, members, count, scount, heap, rng)


@njit(cache=True)
def _advance(n_updates, cdf, probs, indptr, indices, side, g, b, scal, best_side, mode, level_of,
             deg_start, members, count, scount, where, vlevel, heap, hpos, hkey, htie, rng):
    lo = np.inf
    hi = -np.inf
    for _ in range(n_updates):
        u, v = _draw_pair(cdf, probs, side, mode, members, count, scount, heap, rng)
        _flip(u, indptr, indices, side, g, b, scal, mode, level_of, deg_start, members,
              count, scount, where, vlevel, heap, hpos, hkey, htie, rng)
        _flip(v, indptr, indices, side, g, b, scal, mode, level_of, deg_start, members,
              count, scount, where, vlevel, heap, hpos, hkey, htie, rng)
        c = scal[0]
        if c < lo:
            lo = c
        if c > hi:
            hi = c
        if c < scal[1]:
            scal[1] = c
            best_side[:] = side
    return lo, hi


# ----------------------------------------------------------------------------

class PartitionState:
    """Mutable EO state for one bipartitioning run.

    Parameters
    ----------
    graph : Graph
        Graph with an even number of vertices.
    side : array_like
        Initial balanced 0/1 assignment.
    mode : SelectionMode or str
        ``"exact"`` for bucketed exact ranking, ``"heap"`` for the heap
        approximation.
    rng : Generator, optional
        Only used to draw the heap's initial tiebreak keys.
    """

    def __init__(self, graph: Graph, side, mode=SelectionMode.EXACT,
                 rng: np.random.Generator | None = None):
        _check_even(graph)
        side = np.array(side, dtype=np.int8)
        if side.shape != (graph.n,) or not np.isin(side, (0, 1)).all():
            raise ValueError("side must be a 0/1 vector of length n")
        if np.count_nonzero(side) * 2 != graph.n:
            raise ValueError("initial partition is not balanced")
        self.graph = graph
        self.n = graph.n
        self.mode = SelectionMode.parse(mode)
        self.side = side
        self.g, self.b, cut = self._count(side)
        self.scal = np.array([cut, cut], dtype=np.int64)
        self.best_side = side.copy()

        deg = graph.degrees
        nlev, self.deg_start, self.level_of = _fitness_levels(deg)
        if self.mode is SelectionMode.EXACT:
            self.vlevel = self.level_of[self.deg_start[deg] + self.g]
            self.count = np.bincount(self.vlevel, minlength=nlev).astype(np.int64)
            self.scount = np.stack([np.bincount(self.vlevel[side == s], minlength=nlev)
                                    for s in (0, 1)]).astype(np.int64)
            self.members = np.zeros((nlev, int(self.count.max())), dtype=np.int64)
            self.where = np.zeros(self.n, dtype=np.int64)
            fill = np.zeros(nlev, dtype=np.int64)
            for x in range(self.n):
                k = self.vlevel[x]
                self.members[k, fill[k]] = x
                self.where[x] = fill[k]
                fill[k] += 1
            # a level can grow beyond its initial population
            self.members = np.concatenate(
                [self.members, np.zeros((nlev, self.n - self.members.shape[1]), np.int64)], axis=1)
            self.heap = self.hpos = np.zeros(0, np.int64)
            self.hkey = self.htie = np.zeros(0, np.float64)
        else:
            self.vlevel = self.count = self.where = np.zeros(0, np.int64)
            self.members = self.scount = np.zeros((0, 0), np.int64)
            rng = rng if rng is not None else make_rng(0)
            self.hkey = self.fitness()
            self.htie = rng.random(self.n)
            self.heap = np.empty(self.n, np.int64)
            self.hpos = np.empty(self.n, np.int64)
            heap_build(self.heap, self.hpos, self.hkey, self.htie)

    def _count(self, side):
        g = np.zeros(self.graph.n, dtype=np.int64)
        b = np.zeros(self.graph.n, dtype=np.int64)
        rows = np.repeat(np.arange(self.graph.n), self.graph.degrees)
        cross = side[rows] != side[self.graph.indices]
        np.add.at(b, rows, cross)
        np.add.at(g, rows, ~cross)
        return g, b, int(b.sum() // 2)

    def recompute(self):
        """``(g, b, cut)`` from scratch for the current sides."""
        return self._count(self.side)

    @property
    def cost(self) -> int:
        return int(self.scal[0])

    cut = cost

    @property
    def best_cost(self) -> int:
        return int(self.scal[1])

    def best_config(self) -> np.ndarray:
        return self.best_side.copy()

    @property
    def counts(self) -> tuple[int, int]:
        ones = int(np.count_nonzero(self.side))
        return self.n - ones, ones

    def fitness(self) -> np.ndarray:
        d = self.g + self.b
        out = np.ones(self.n)
        np.divide(self.g, d, out=out, where=d > 0)
        return out

    def _args(self):
        return (self.graph.indptr, self.graph.indices, self.side, self.g, self.b, self.scal,
                _EXACT if self.mode is SelectionMode.EXACT else _HEAP,
                self.level_of, self.deg_start, self.members, self.count, self.scount,
                self.where, self.vlevel, self.heap, self.hpos, self.hkey, self.htie)

    def advance(self, n_updates: int, selector: RankSelector, rng: np.random.Generator):
        if selector.size != self.n:
            raise ValueError("selector must cover all n vertices")
        a = self._args()
        lo, hi = _advance(int(n_updates), selector.cdf, selector.probs, a[0], a[1], a[2], a[3], a[4], a[5],
                          self.best_side, *a[6:], rng)
        return int(lo), int(hi)

    def draw_pair(self, selector: RankSelector, rng: np.random.Generator) -> tuple[int, int]:
        """The ``(u, v)`` an update would swap, without swapping."""
        u, v = _draw_pair(selector.cdf, selector.probs, self.side, _EXACT if self.mode is SelectionMode.EXACT else _HEAP,
                          self.members, self.count, self.scount, self.heap, rng)
        return int(u), int(v)

    def swap(self, u: int, v: int, rng: np.random.Generator | None = None) -> None:
        """Swap two vertices on opposite sides, updating all bookkeeping."""
        if self.side[u] == self.side[v]:
            raise ValueError("swap needs vertices on opposite sides")
        rng = rng if rng is not None else make_rng(0)
        a = self._args()
        for x in (u, v):
            _flip(int(x), *a, rng)
        if self.scal[0] < self.scal[1]:
            self.scal[1] = self.scal[0]
            self.best_side[:] = self.side

    def ranked_levels(self) -> list[list[int]]:
        """Vertex groups of equal fitness, worst first (exact mode only)."""
        return [sorted(self.members[k, :self.count[k]].tolist())
                for k in range(self.count.shape[0]) if self.count[k]]

    def check(self) -> bool:
        g, b, cut = self.recompute()
        ok = (np.array_equal(g, self.g) and np.array_equal(b, self.b)
              and cut == self.cost and self.counts[0] == self.counts[1])
        if self.mode is SelectionMode.EXACT:
            lv = self.level_of[self.deg_start[self.graph.degrees] + self.g]
            ok = ok and np.array_equal(lv, self.vlevel)
            nlev = self.count.shape[0]
            ok = ok and np.array_equal(np.bincount(lv, minlength=nlev), self.count)
            for sd in (0, 1):
                ok = ok and np.array_equal(np.bincount(lv[self.side == sd], minlength=nlev),
                                           self.scount[sd])
        else:
            ok = ok and np.array_equal(self.hkey, self.fitness())
        return bool(ok)


def vertex_fitness(state: PartitionState, i: int) -> float:
    d = state.g[i] + state.b[i]
    return 1.0 if d == 0 else float(state.g[i] / d)


def eo_swap_step(state: PartitionState, selector: RankSelector, rng: np.random.Generator):
    """One EO update; returns the state for chaining."""
    state.advance(1, selector, rng)
    return state


def solve_partition_eo(graph: Graph, config: EoConfig, init: str = "greedy") -> RunResult:
    """Greedy (or random) start followed by ``config.max_updates`` EO swaps."""
    _check_even(graph)
    rng = make_rng(config.seed)
    if init == "greedy":
        side = greedy_init(graph, rng)
    elif init == "random":
        side = random_balanced(graph.n, rng)
    else:
        raise ValueError(f"unknown init {init!r}")
    state = PartitionState(graph, side, config.selection_mode, rng)
    result = run_eo(state, config, rng)
    return result


def write_partition(side, path) -> None:
    """One line per vertex: ``<1-based vertex> <side>``."""
    with open(path, "w", newline="\n") as fh:
        for i, s in enumerate(side):
            fh.write(f"{i + 1} {int(s)}\n")


def read_partition(path) -> np.ndarray:
    rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
    side = np.empty(rows.shape[0], dtype=np.int8)
    side[rows[:, 0] - 1] = rows[:, 1]
    return side
