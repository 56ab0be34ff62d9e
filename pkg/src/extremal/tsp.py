"""Extremal optimisation for the symmetric travelling salesman problem.

A city's fitness is ``3 / (p + q)`` where ``p`` and ``q`` are the neighbour
ranks (1 = nearest) of the two cities it is linked to in the tour.  One
update picks a city ``i`` by fitness rank, drops its longer tour link
``(i, a)``, draws a new partner ``j`` from ``i``'s neighbour list with the
same power law, and closes the tour with the single valid two-change.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .rank import (EoConfig, RankSelector, RunResult, SelectionMode, build_selector,
                   draw_rank, heap_build, heap_update, make_rng, run_eo)

__all__ = [
    "InstanceKind",
    "TspInstance",
    "CityFitness",
    "TourState",
    "gen_euclidean",
    "gen_random_matrix",
    "torus_distances",
    "tour_length",
    "city_fitness",
    "eo_move_tsp",
    "solve_tsp_eo",
    "is_valid_tour",
    "read_instance",
    "write_instance",
    "read_tour",
    "write_tour",
    "TspFormatError",
]


class InstanceKind(enum.Enum):
    EUCLIDEAN_TORUS = "eucl"
    RANDOM_MATRIX = "rand"

    @classmethod
    def parse(cls, value) -> "InstanceKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key in ("eucl", "euclidean", "euclideantorus"):
            return cls.EUCLIDEAN_TORUS
        if key in ("rand", "random", "randommatrix", "mat"):
            return cls.RANDOM_MATRIX
        raise ValueError(f"unknown instance kind {value!r}")


class TspFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__((f"line {lineno}: " if lineno else "") + message)


@dataclass(frozen=True, eq=False)
class TspInstance:
    """Symmetric distance model plus per-city neighbour rankings.

    ``neighbors[i]`` lists the other cities by ascending distance (ties by
    index) and ``neighbor_rank[i, j]`` is the 1-based position of ``j`` in
    it (0 on the diagonal).
    """

    n: int
    kind: InstanceKind
    dist: np.ndarray = field(repr=False)
    coords: np.ndarray | None = field(default=None, repr=False)
    neighbors: np.ndarray = field(init=False, repr=False)
    neighbor_rank: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.ascontiguousarray(self.dist, dtype=np.float64)
        if d.shape != (self.n, self.n):
            raise ValueError("distance matrix shape does not match n")
        if not np.array_equal(d, d.T) or np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValueError("distances must be symmetric, non-negative, zero diagonal")
        n = self.n
        idx = np.arange(n)
        nbr = np.empty((n, n - 1), dtype=np.int64)
        rank = np.zeros((n, n), dtype=np.int64)
        for i in range(n):
            others = np.delete(idx, i)
            order = others[np.lexsort((others, d[i, others]))]
            nbr[i] = order
            rank[i, order] = np.arange(1, n)
        for arr in (d, nbr, rank):
            arr.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "neighbors", nbr)
        object.__setattr__(self, "neighbor_rank", rank)


@dataclass(frozen=True)
class CityFitness:
    p: int
    q: int

    @property
    def lam(self) -> float:
        return 3.0 / (self.p + self.q)


def torus_distances(coords: np.ndarray) -> np.ndarray:
    delta = np.abs(coords[:, None, :] - coords[None, :, :])
    delta = np.minimum(delta, 1.0 - delta)
    dist = np.sqrt((delta ** 2).sum(-1))
    np.fill_diagonal(dist, 0.0)
    return dist


def from_coords(coords) -> TspInstance:
    coords = np.asarray(coords, dtype=np.float64)
    return TspInstance(coords.shape[0], InstanceKind.EUCLIDEAN_TORUS, torus_distances(coords), coords)


def from_upper(n: int, upper) -> TspInstance:
    """Random-matrix instance from row-major upper-triangle entries."""
    d = np.zeros((n, n))
    d[np.triu_indices(n, 1)] = upper
    return TspInstance(n, InstanceKind.RANDOM_MATRIX, d + d.T)


def gen_euclidean(n: int, seed: int = 0) -> TspInstance:
    """``n`` uniform points on the periodic unit square."""
    if n < 3:
        raise ValueError("TSP instance needs n >= 3")
    return from_coords(make_rng(seed).random((n, 2)))


def gen_random_matrix(n: int, seed: int = 0) -> TspInstance:
    """Symmetric matrix with i.i.d. uniform [0, 1) entries above the diagonal."""
    if n < 3:
        raise ValueError("TSP instance needs n >= 3")
    return from_upper(n, make_rng(seed).random(n * (n - 1) // 2))


def is_valid_tour(order, n: int) -> bool:
    order = np.asarray(order)
    return order.shape == (n,) and np.array_equal(np.sort(order), np.arange(n))


def tour_length(instance: TspInstance, order) -> float:
    order = np.asarray(order)
    return float(math.fsum(instance.dist[order, np.roll(order, -1)]))


def city_fitness(instance: TspInstance, order, i: int) -> CityFitness:
    order = list(order)
    k = order.index(i)
    prv, nxt = order[k - 1], order[(k + 1) % len(order)]
    p, q = sorted((int(instance.neighbor_rank[i, prv]), int(instance.neighbor_rank[i, nxt])))
    return CityFitness(p, q)


_EXACT = 0
_HEAP = 1
# rejection draws for the new partner before sampling the conditional law directly
REDRAW_LIMIT = 64

# ----------------------------------------------------------------------------
# kernels

@njit(cache=True)
def _reverse(order, pos, start, end):
    # reverse the cyclic stretch start..end, or its complement if shorter
    n = order.shape[0]
    length = (end - start) % n + 1
    if 2 * length > n:
        start, end = (end + 1) % n, (start - 1) % n
        length = n - length
    p = start
    q = end
    for _ in range(length // 2):
        x = order[p]
        y = order[q]
        order[p] = y
        pos[y] = p
        order[q] = x
        pos[x] = q
        p += 1
        if p == n:
            p = 0
        q -= 1
        if q < 0:
            q = n - 1


@njit(cache=True)
def _rank_sum(x, order, pos, rank):
    n = order.shape[0]
    k = pos[x]
    return rank[x, order[k - 1 if k > 0 else n - 1]] + rank[x, order[k + 1 if k + 1 < n else 0]]


@njit(cache=True)
def _refresh(x, order, pos, rank, ssum, mode, members, count, where, heap, hpos, hkey, htie, rng):
    s = _rank_sum(x, order, pos, rank)
    old = ssum[x]
    if s == old:
        return
    ssum[x] = s
    if mode == 0:
        k = where[x]
        last = members[old, count[old] - 1]
        members[old, k] = last
        where[last] = k
        count[old] -= 1
        members[s, count[s]] = x
        where[x] = count[s]
        count[s] += 1
    else:
        heap_update(heap, hpos, hkey, htie, x, 3.0 / s, rng.random())


@njit(cache=True)
def _select_city(r, mode, members, count, heap, rng):
    if mode == 1:
        return heap[r - 1]
    cum = 0
    for s in range(count.shape[0] - 1, -1, -1):
        c = count[s]
        if cum + c >= r:
            j = int(rng.random() * c)
            if j >= c:
                j = c - 1
            return members[s, j]
        cum += c
    return -1


@njit(cache=True)
def _two_change(i, a, j, order, pos, dist, rank, ssum, fscal, mode, members, count, where,
                heap, hpos, hkey, htie, rng):
    n = order.shape[0]
    if order[(pos[i] + 1) % n] == a:
        c = order[(pos[j] + 1) % n]
        _reverse(order, pos, pos[a], pos[j])
    else:
        c = order[(pos[j] - 1) % n]
        _reverse(order, pos, pos[i], pos[c])
    fscal[0] += dist[i, j] + dist[a, c] - dist[i, a] - dist[j, c]
    _refresh(i, order, pos, rank, ssum, mode, members, count, where, heap, hpos, hkey, htie, rng)
    _refresh(j, order, pos, rank, ssum, mode, members, count, where, heap, hpos, hkey, htie, rng)
    _refresh(a, order, pos, rank, ssum, mode, members, count, where, heap, hpos, hkey, htie, rng)
    _refresh(c, order, pos, rank, ssum, mode, members, count, where, heap, hpos, hkey, htie, rng)
    return c


@njit(cache=True)
def _draw_partner(i, a, b, cdf_nb, probs_nb, nbr, rank, rng):
    # P(rank) over i's neighbour list, conditioned on j not in {a, b}
    for _ in range(REDRAW_LIMIT):
        j = nbr[i, draw_rank(cdf_nb, rng) - 1]
        if j != a and j != b:
            return j
    ra = rank[i, a] - 1
    rb = rank[i, b] - 1
    mass = 0.0
    first = -1
    for r in range(probs_nb.shape[0]):
        if r != ra and r != rb:
            mass += probs_nb[r]
            if first < 0:
                first = nbr[i, r]
    if mass == 0.0:
        return first
    u = rng.random() * mass
    acc = 0.0
    last = first
    for r in range(probs_nb.shape[0]):
        if r == ra or r == rb:
            continue
        last = nbr[i, r]
        acc += probs_nb[r]
        if acc > u:
            break
    return last


@njit(cache=True)
def _advance(n_updates, cdf, cdf_nb, probs_nb, order, pos, dist, nbr, rank, ssum, fscal, best_order, mode,
             members, count, where, heap, hpos, hkey, htie, rng):
    n = order.shape[0]
    lo = np.inf
    hi = -np.inf
    for _ in range(n_updates):
        i = _select_city(draw_rank(cdf, rng), mode, members, count, heap, rng)
        k = pos[i]
        prv = order[k - 1 if k > 0 else n - 1]
        nxt = order[k + 1 if k + 1 < n else 0]
        dp = dist[i, prv]
        dn = dist[i, nxt]
        if dp > dn or (dp == dn and rng.random() < 0.5):
            a = prv
            b = nxt
        else:
            a = nxt
            b = prv
        j = _draw_partner(i, a, b, cdf_nb, probs_nb, nbr, rank, rng)
        _two_change(i, a, j, order, pos, dist, rank, ssum, fscal, mode, members, count, where,
                    heap, hpos, hkey, htie, rng)
        length = fscal[0]
        if length < lo:
            lo = length
        if length > hi:
            hi = length
        if length < fscal[1]:
            fscal[1] = length
            best_order[:] = order
    return lo, hi


# ----------------------------------------------------------------------------

class TourState:
    """Mutable EO state for one TSP run (tour, length, city fitness ranking)."""

    def __init__(self, instance: TspInstance, order, mode=SelectionMode.EXACT,
                 rng: np.random.Generator | None = None):
        n = instance.n
        if n < 4:
            raise ValueError("EO tour moves need n >= 4")
        order = np.array(order, dtype=np.int64)
        if not is_valid_tour(order, n):
            raise ValueError("order is not a permutation of 0..n-1")
        self.instance = instance
        self.n = n
        self.mode = SelectionMode.parse(mode)
        self.order = order
        self.pos = np.empty(n, dtype=np.int64)
        self.pos[order] = np.arange(n)
        self.fscal = np.array([tour_length(instance, order)] * 2)
        self.best_order = order.copy()
        self.ssum = np.array([_rank_sum(x, order, self.pos, instance.neighbor_rank)
                              for x in range(n)], dtype=np.int64)
        self._nb_selector: RankSelector | None = None
        if self.mode is SelectionMode.EXACT:
            self.count = np.bincount(self.ssum, minlength=2 * n).astype(np.int64)
            self.members = np.zeros((2 * n, n), dtype=np.int64)
            self.where = np.zeros(n, dtype=np.int64)
            fill = np.zeros(2 * n, dtype=np.int64)
            for x in range(n):
                s = self.ssum[x]
                self.members[s, fill[s]] = x
                self.where[x] = fill[s]
                fill[s] += 1
            self.heap = self.hpos = np.zeros(0, np.int64)
            self.hkey = self.htie = np.zeros(0)
        else:
            self.count = self.where = np.zeros(0, np.int64)
            self.members = np.zeros((0, 0), np.int64)
            rng = rng if rng is not None else make_rng(0)
            self.hkey = 3.0 / self.ssum
            self.htie = rng.random(n)
            self.heap = np.empty(n, np.int64)
            self.hpos = np.empty(n, np.int64)
            heap_build(self.heap, self.hpos, self.hkey, self.htie)

    @property
    def cost(self) -> float:
        return float(self.fscal[0])

    length = cost

    @property
    def best_cost(self) -> float:
        return tour_length(self.instance, self.best_order)

    def best_config(self) -> np.ndarray:
        return self.best_order.copy()

    def fitness(self) -> np.ndarray:
        return 3.0 / self.ssum

    def neighbor_selector(self, tau: float) -> RankSelector:
        if self._nb_selector is None or self._nb_selector.tau != tau:
            self._nb_selector = build_selector(self.n - 1, tau)
        return self._nb_selector

    def _mode_args(self):
        return (_EXACT if self.mode is SelectionMode.EXACT else _HEAP, self.members, self.count,
                self.where, self.heap, self.hpos, self.hkey, self.htie)

    def advance(self, n_updates: int, selector: RankSelector, rng: np.random.Generator):
        if selector.size != self.n:
            raise ValueError("selector must cover all n cities")
        inst = self.instance
        nb = self.neighbor_selector(selector.tau)
        lo, hi = _advance(int(n_updates), selector.cdf, nb.cdf, nb.probs,
                          self.order, self.pos, inst.dist, inst.neighbors, inst.neighbor_rank,
                          self.ssum, self.fscal, self.best_order, *self._mode_args(), rng)
        return float(lo), float(hi)

    def two_change(self, i: int, a: int, j: int, rng: np.random.Generator | None = None) -> int:
        """Drop link ``(i, a)``, add ``(i, j)`` and close the tour; returns ``c``."""
        n = self.n
        k = self.pos[i]
        links = {int(self.order[k - 1]), int(self.order[(k + 1) % n])}
        if a not in links:
            raise ValueError(f"{a} is not a tour neighbour of {i}")
        if j in links or j == i:
            raise ValueError("new partner must not be i or one of its current neighbours")
        rng = rng if rng is not None else make_rng(0)
        inst = self.instance
        c = _two_change(int(i), int(a), int(j), self.order, self.pos, inst.dist,
                        inst.neighbor_rank, self.ssum, self.fscal, *self._mode_args(), rng)
        if self.fscal[0] < self.fscal[1]:
            self.fscal[1] = self.fscal[0]
            self.best_order[:] = self.order
        return int(c)

    def check(self, rtol: float = 1e-9) -> bool:
        inst = self.instance
        if not is_valid_tour(self.order, self.n):
            return False
        if not np.array_equal(self.order[self.pos], np.arange(self.n)):
            return False
        true_len = tour_length(inst, self.order)
        if abs(true_len - self.cost) > rtol * max(1.0, true_len):
            return False
        sums = [_rank_sum(x, self.order, self.pos, inst.neighbor_rank) for x in range(self.n)]
        if not np.array_equal(sums, self.ssum):
            return False
        if self.mode is SelectionMode.EXACT:
            return bool(np.array_equal(np.bincount(self.ssum, minlength=2 * self.n), self.count))
        return bool(np.allclose(self.hkey, 3.0 / self.ssum, rtol=0, atol=0))




def eo_move_tsp(state: TourState, selector: RankSelector, rng: np.random.Generator) -> TourState:
    state.advance(1, selector, rng)
    return state


def solve_tsp_eo(instance: TspInstance, config: EoConfig) -> RunResult:
    """Random initial tour followed by ``config.max_updates`` EO moves."""
    rng = make_rng(config.seed)
    state = TourState(instance, rng.permutation(instance.n), config.selection_mode, rng)
    return run_eo(state, config, rng)


# ----------------------------------------------------------------------------
# files

def write_instance(instance: TspInstance, path) -> None:
    with open(path, "w", newline="\n") as fh:
        if instance.kind is InstanceKind.EUCLIDEAN_TORUS:
            fh.write(f"EUCL {instance.n}\n")
            for x, y in instance.coords:
                fh.write(f"{float(x)!r} {float(y)!r}\n")
        else:
            fh.write(f"MAT {instance.n}\n")
            for k in range(instance.n - 1):
                fh.write(" ".join(repr(float(v)) for v in instance.dist[k, k + 1:]) + "\n")


def read_instance(path) -> TspInstance:
    with open(path) as fh:
        lines = [ln.rstrip("\r") for ln in fh.read().split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TspFormatError("empty file", 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] not in ("EUCL", "MAT"):
        raise TspFormatError("header must be 'EUCL <n>' or 'MAT <n>'", 1)
    try:
        n = int(head[1])
    except ValueError:
        raise TspFormatError("city count must be an integer", 1) from None
    if n < 3:
        raise TspFormatError("need at least 3 cities", 1)
    body = lines[1:]

    def floats(k, expect):
        tok = body[k].split()
        if len(tok) != expect:
            raise TspFormatError(f"expected {expect} values, found {len(tok)}", k + 2)
        try:
            return [float(t) for t in tok]
        except ValueError:
            raise TspFormatError("expected decimal floats", k + 2) from None

    if head[0] == "EUCL":
        if len(body) != n:
            raise TspFormatError(f"expected {n} coordinate lines, found {len(body)}", len(lines))
        coords = np.array([floats(k, 2) for k in range(n)])
        if np.any(coords < 0) or np.any(coords >= 1):
            raise TspFormatError("coordinates must lie in [0, 1)")
        return from_coords(coords)
    if len(body) != n - 1:
        raise TspFormatError(f"expected {n - 1} matrix lines, found {len(body)}", len(lines))
    upper = [v for k in range(n - 1) for v in floats(k, n - 1 - k)]
    if min(upper) < 0:
        raise TspFormatError("distances must be non-negative")
    return from_upper(n, upper)


def write_tour(order, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(" ".join(str(int(x)) for x in order) + "\n")


def read_tour(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(t) for t in fh.read().split()], dtype=np.int64)
