"""Power-law rank selection and the generic tau-EO update loop.

Ranks run from 1 (worst fitness) to N (best).  A rank ``n`` is drawn with
probability proportional to ``n**-tau`` by inverse-CDF lookup on an exact,
precomputed table.  Two ways of turning a sampled rank into an element are
provided: an exact ranking (kept by the problem modules as fitness buckets)
and the cheaper heap approximation, which reads the element at level-order
position ``n`` of a binary min-heap.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numba import njit

from .errors import InvalidStateError

__all__ = [
    "RNG_ALGORITHM",
    "SelectionMode",
    "RankSelector",
    "build_selector",
    "sample_rank",
    "rank_for_uniform",
    "FitnessHeap",
    "heap_select",
    "EoConfig",
    "RunResult",
    "EoProblem",
    "run_eo",
    "make_rng",
    "TRACE_BINS",
]

#: Bit generator used everywhere; recorded in run outputs.
RNG_ALGORITHM = "numpy.PCG64"

TRACE_BINS = 100


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


class SelectionMode(enum.Enum):
    EXACT = "exact"
    HEAP = "heap"

    @classmethod
    def parse(cls, value: "SelectionMode | str") -> "SelectionMode":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"exact": cls.EXACT, "exactrank": cls.EXACT,
                   "heap": cls.HEAP, "heapapprox": cls.HEAP}
        if key not in aliases:
            raise ValueError(f"unknown selection mode {value!r}")
        return aliases[key]


# ----------------------------------------------------------------------------
# rank selector

@dataclass(frozen=True, eq=False)
class RankSelector:
    """Discrete power law over ranks ``1..size``.

    Attributes
    ----------
    size : int
        Number of ranks N.
    tau : float
        Exponent; 0 gives the uniform distribution.
    probs : ndarray
        ``probs[n-1] = n**-tau / Z``.
    cdf : ndarray
        Cumulative probabilities, ``cdf[-1] == 1`` exactly.
    """

    size: int
    tau: float
    probs: np.ndarray = field(repr=False)
    cdf: np.ndarray = field(repr=False)

    def mean_rank(self) -> float:
        return float(np.dot(np.arange(1, self.size + 1), self.probs))


def build_selector(size: int, tau: float) -> RankSelector:
    """Tabulate ``P(n) = n**-tau / sum_k k**-tau`` for ``n = 1..size``."""
    if int(size) != size or size < 1:
        raise ValueError(f"selector size must be a positive integer, got {size!r}")
    tau = float(tau)
    if not math.isfinite(tau) or tau < 0:
        raise ValueError(f"tau must be finite and non-negative, got {tau!r}")
    size = int(size)
    ranks = np.arange(1, size + 1, dtype=np.float64)
    # Computed in log space so large tau does not underflow to a zero Z.
    weights = np.exp(-tau * np.log(ranks))
    z = math.fsum(weights)
    probs = weights / z
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    probs.setflags(write=False)
    cdf.setflags(write=False)
    return RankSelector(size, tau, probs, cdf)


@njit(cache=True)
def _rank_from_u(cdf, u):
    # first index k with cdf[k] >= u; u lies in (0, 1]
    lo = 0
    hi = cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if cdf[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    return lo + 1


@njit(cache=True)
def draw_rank(cdf, rng):
    """Numba-side rank draw; returns a 1-based rank."""
    return _rank_from_u(cdf, 1.0 - rng.random())


@njit(cache=True)
def _draw_many(cdf, rng, count):
    out = np.empty(count, dtype=np.int64)
    for k in range(count):
        out[k] = _rank_from_u(cdf, 1.0 - rng.random())
    return out


def rank_for_uniform(selector: RankSelector, u: float) -> int:
    """Rank ``n`` with ``cdf[n-1] < u <= cdf[n]`` for ``u`` in (0, 1]."""
    if not 0.0 < u <= 1.0:
        raise ValueError("u must lie in (0, 1]")
    return int(_rank_from_u(selector.cdf, float(u)))


def sample_rank(selector: RankSelector, rng: np.random.Generator, size: int | None = None):
    """Draw one rank (or an array of ``size`` ranks) from ``selector``."""
    if size is None:
        return int(draw_rank(selector.cdf, rng))
    return _draw_many(selector.cdf, rng, int(size))


# ----------------------------------------------------------------------------
# binary min-heap keyed on (fitness, random tiebreak)

@njit(cache=True, inline="always")
def _heap_less(key, tie, x, y):
    if key[x] < key[y]:
        return True
    if key[x] > key[y]:
        return False
    return tie[x] < tie[y]


@njit(cache=True)
def heap_sift_up(heap, pos, key, tie, slot):
    x = heap[slot]
    while slot > 0:
        parent = (slot - 1) >> 1
        y = heap[parent]
        if _heap_less(key, tie, x, y):
            heap[slot] = y
            pos[y] = slot
            slot = parent
        else:
            break
    heap[slot] = x
    pos[x] = slot


@njit(cache=True)
def heap_sift_down(heap, pos, key, tie, slot):
    n = heap.shape[0]
    x = heap[slot]
    while True:
        child = 2 * slot + 1
        if child >= n:
            break
        if child + 1 < n and _heap_less(key, tie, heap[child + 1], heap[child]):
            child += 1
        y = heap[child]
        if _heap_less(key, tie, y, x):
            heap[slot] = y
            pos[y] = slot
            slot = child
        else:
            break
    heap[slot] = x
    pos[x] = slot


@njit(cache=True)
def heap_update(heap, pos, key, tie, x, new_key, new_tie):
    """Re-key element ``x`` and restore the heap property."""
    key[x] = new_key
    tie[x] = new_tie
    slot = pos[x]
    heap_sift_up(heap, pos, key, tie, slot)
    heap_sift_down(heap, pos, key, tie, pos[x])


@njit(cache=True)
def heap_build(heap, pos, key, tie):
    n = heap.shape[0]
    for s in range(n):
        heap[s] = s
        pos[s] = s
    for s in range((n >> 1) - 1, -1, -1):
        heap_sift_down(heap, pos, key, tie, s)


class FitnessHeap:
    """Binary min-heap over element ids, worst fitness at the root.

    ``entries`` lists element ids in level order.  Equal fitnesses are
    ordered by a random tiebreak key that is redrawn whenever an element's
    fitness is updated.
    """

    def __init__(self, fitness, rng: np.random.Generator | None = None):
        fitness = np.array(fitness, dtype=np.float64)
        n = fitness.shape[0]
        rng = rng if rng is not None else make_rng(0)
        self.key = fitness
        self.tie = rng.random(n)
        self.heap = np.empty(n, dtype=np.int64)
        self.pos = np.empty(n, dtype=np.int64)
        if n:
            heap_build(self.heap, self.pos, self.key, self.tie)

    def __len__(self) -> int:
        return self.heap.shape[0]

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(x), float(self.key[x])) for x in self.heap]

    def root(self) -> int:
        if len(self) == 0:
            raise InvalidStateError("heap is empty")
        return int(self.heap[0])

    def update(self, element: int, fitness: float, rng: np.random.Generator) -> None:
        heap_update(self.heap, self.pos, self.key, self.tie, int(element),
                    float(fitness), rng.random())

    def check(self) -> bool:
        """Full scan of the heap property and id uniqueness."""
        n = len(self)
        if sorted(self.heap.tolist()) != list(range(n)):
            return False
        for s in range(1, n):
            p, c = self.heap[(s - 1) >> 1], self.heap[s]
            if (self.key[c], self.tie[c]) < (self.key[p], self.tie[p]):
                return False
        return bool(np.all(self.heap[self.pos] == np.arange(n)))


def heap_select(heap: FitnessHeap, selector: RankSelector, rng: np.random.Generator) -> int:
    """Element at the level-order position of a sampled rank."""
    if len(heap) == 0:
        raise InvalidStateError("cannot select from an empty heap")
    if selector.size != len(heap):
        raise ValueError("selector size must equal heap size")
    return int(heap.heap[sample_rank(selector, rng) - 1])


# ----------------------------------------------------------------------------
# EO driver

@dataclass(frozen=True)
class EoConfig:
    tau: float
    max_updates: int
    seed: int = 0
    selection_mode: SelectionMode = SelectionMode.EXACT

    def __post_init__(self):
        if not math.isfinite(self.tau) or self.tau < 0:
            raise ValueError("tau must be finite and >= 0")
        if self.max_updates < 0:
            raise ValueError("max_updates must be >= 0")
        object.__setattr__(self, "selection_mode", SelectionMode.parse(self.selection_mode))


@dataclass(eq=False)
class RunResult:
    """Outcome of one optimisation run.

    ``trace`` holds ``(bin, min_cost, max_cost)`` per non-empty update bin;
    costs there are those of the current configuration after each update.
    """

    best_cost: float
    best_config: np.ndarray
    trace: list[tuple[int, float, float]]
    updates_used: int
    wall_time: float
    initial_cost: float
    seed: int = 0
    rng_algorithm: str = RNG_ALGORITHM
    method: str = "eo"

    def __eq__(self, other):
        # wall_time is excluded: it is the only non-deterministic field.
        if not isinstance(other, RunResult):
            return NotImplemented
        return (self.best_cost == other.best_cost
                and np.array_equal(self.best_config, other.best_config)
                and self.trace == other.trace
                and self.updates_used == other.updates_used
                and self.initial_cost == other.initial_cost
                and self.seed == other.seed
                and self.rng_algorithm == other.rng_algorithm
                and self.method == other.method)

    def best_so_far(self) -> list[float]:
        """Running best after each trace bin, starting from the initial cost."""
        best = self.initial_cost
        out = []
        for _, lo, _ in self.trace:
            best = min(best, lo)
            out.append(best)
        return out

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "best_cost": self.best_cost,
            "best_config": [int(x) for x in self.best_config],
            "trace": [[int(b), lo, hi] for b, lo, hi in self.trace],
            "updates_used": self.updates_used,
            "wall_time": self.wall_time,
            "initial_cost": self.initial_cost,
            "seed": self.seed,
            "rng_algorithm": self.rng_algorithm,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        return cls(
            best_cost=data["best_cost"],
            best_config=np.asarray(data["best_config"], dtype=np.int64),
            trace=[(int(b), lo, hi) for b, lo, hi in data["trace"]],
            updates_used=int(data["updates_used"]),
            wall_time=float(data.get("wall_time", 0.0)),
            initial_cost=data["initial_cost"],
            seed=int(data.get("seed", 0)),
            rng_algorithm=data.get("rng_algorithm", RNG_ALGORITHM),
            method=data.get("method", "eo"),
        )


class EoProblem(Protocol):
    """What ``run_eo`` needs from a problem.

    ``advance`` performs a block of updates and reports the min and max cost
    visited; the problem keeps its own best-so-far snapshot so that the hot
    loop never returns to Python per update.
    """

    n: int

    @property
    def cost(self) -> float: ...

    def fitness(self) -> np.ndarray: ...

    def advance(self, n_updates: int, selector: RankSelector,
                rng: np.random.Generator) -> tuple[float, float]: ...

    @property
    def best_cost(self) -> float: ...

    def best_config(self) -> np.ndarray: ...


def bin_edges(max_updates: int, bins: int = TRACE_BINS) -> list[int]:
    return [(k * max_updates) // bins for k in range(bins + 1)]


def run_eo(problem: EoProblem, config: EoConfig,
           rng: np.random.Generator | None = None) -> RunResult:
    """Run ``config.max_updates`` EO updates on ``problem``.

    The update budget is cut into 100 equal-width bins; empty bins (budgets
    below 100) are left out of the trace.
    """
    rng = rng if rng is not None else make_rng(config.seed)
    selector = build_selector(problem.n, config.tau)
    start = time.perf_counter()
    initial = problem.cost
    trace = []
    edges = bin_edges(config.max_updates)
    for k in range(TRACE_BINS):
        count = edges[k + 1] - edges[k]
        if count == 0:
            continue
        lo, hi = problem.advance(count, selector, rng)
        trace.append((k, lo, hi))
    return RunResult(
        best_cost=problem.best_cost,
        best_config=problem.best_config(),
        trace=trace,
        updates_used=config.max_updates,
        wall_time=time.perf_counter() - start,
        initial_cost=initial,
        seed=config.seed,
    )
