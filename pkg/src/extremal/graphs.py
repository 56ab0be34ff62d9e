"""Undirected simple graphs, random generators and the adjacency file format.

File format (Chaco style, 1-based vertex ids)::

    <n> <m_edges>
    <neighbours of vertex 1, ascending>
    ...
    <neighbours of vertex n, ascending>

Lines starting with ``#`` are comments.  A blank line is an isolated vertex.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .rank import make_rng

__all__ = [
    "Graph",
    "GraphFormatError",
    "GeometricSpec",
    "generate_geometric",
    "generate_random",
    "mean_connectivity",
    "component_sizes",
    "read_graph",
    "write_graph",
]


class GraphFormatError(ValueError):
    """Malformed graph file; ``lineno`` is the 1-based offending line."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable graph stored in CSR form with sorted neighbour lists.

    ``coords`` is kept for geometric graphs only.
    """

    n: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    coords: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, n: int, edges, coords=None) -> "Graph":
        """Build from an iterable of 0-based ``(i, j)`` pairs."""
        if n < 1:
            raise ValueError("graph needs at least one vertex")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                       dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        both = np.concatenate([e, e[:, ::-1]])
        both = np.unique(both, axis=0) if both.size else both
        order = np.lexsort((both[:, 1], both[:, 0])) if both.size else np.empty(0, np.int64)
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=n) if both.size else np.zeros(n, np.int64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.ascontiguousarray(both[:, 1], dtype=np.int64)
        return cls(n, indptr, indices, coords)

    @classmethod
    def from_adjacency(cls, adjacency) -> "Graph":
        adjacency = [list(a) for a in adjacency]
        edges = [(i, j) for i, nb in enumerate(adjacency) for j in nb]
        g = cls.from_edges(len(adjacency), edges)
        for i, nb in enumerate(adjacency):
            for j in nb:
                if i not in adjacency[j]:
                    raise ValueError(f"adjacency is not symmetric at ({i}, {j})")
        return g

    @property
    def m_edges(self) -> int:
        return int(self.indices.shape[0] // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of edges with ``i < j``."""
        rows = np.repeat(np.arange(self.n), self.degrees)
        mask = rows < self.indices
        return np.column_stack([rows[mask], self.indices[mask]])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))


@dataclass(frozen=True)
class GeometricSpec:
    """Random geometric graph request: ``n`` points, mean connectivity ``alpha``."""

    n: int
    alpha: float
    seed: int = 0

    @property
    def threshold(self) -> float:
        return math.sqrt(self.alpha / (math.pi * self.n))


def generate_geometric(spec: GeometricSpec) -> Graph:
    """Unit-square geometric graph with edges between points closer than ``d``.

    ``d`` solves ``n * pi * d**2 = alpha``.  The square is not periodic.
    """
    if spec.n < 2:
        raise ValueError("geometric graph needs n >= 2")
    if not spec.alpha > 0:
        raise ValueError("alpha must be positive")
    d = spec.threshold
    if d > math.sqrt(2.0):
        raise ValueError(f"alpha={spec.alpha} gives d={d:.3f} > sqrt(2)")
    rng = make_rng(spec.seed)
    pts = rng.random((spec.n, 2))
    pairs = cKDTree(pts).query_pairs(r=d, output_type="ndarray")
    if len(pairs):
        dist = np.hypot(*(pts[pairs[:, 0]] - pts[pairs[:, 1]]).T)
        pairs = pairs[dist < d]
    return Graph.from_edges(spec.n, pairs, coords=pts)


def generate_random(n: int, alpha: float, seed: int = 0) -> Graph:
    """Erdos-Renyi G(n, m) graph with ``m = round(alpha * n / 2)`` edges."""
    m = int(round(alpha * n / 2))
    total = n * (n - 1) // 2
    if m > total:
        raise ValueError("too many edges requested")
    rng = make_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    picks = np.sort(rng.choice(total, size=m, replace=False))
    return Graph.from_edges(n, np.column_stack([iu[picks], ju[picks]]))


def mean_connectivity(g: Graph) -> float:
    return 2.0 * g.m_edges / g.n


def component_sizes(g: Graph) -> np.ndarray:
    """Connected component sizes, largest first."""
    data = np.ones(g.indices.shape[0], dtype=np.int8)
    mat = csr_matrix((data, g.indices, g.indptr), shape=(g.n, g.n))
    _, labels = connected_components(mat, directed=False)
    return np.sort(np.bincount(labels))[::-1]


def write_graph(g: Graph, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{g.n} {g.m_edges}\n")
        for i in range(g.n):
            fh.write(" ".join(str(j + 1) for j in g.neighbors(i)) + "\n")


def _ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise GraphFormatError("expected decimal integers", lineno) from None


def read_graph(path: str | os.PathLike) -> Graph:
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    header = None
    rows: list[tuple[int, list[int]]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if line.lstrip().startswith("#"):
            continue
        if header is None:
            tok = line.split()
            if len(tok) not in (2, 3):
                raise GraphFormatError("header must be '<n> <m_edges>'", lineno)
            vals = _ints(tok, lineno)
            if vals[0] < 1 or vals[1] < 0 or (len(vals) == 3 and vals[2] != 0):
                raise GraphFormatError("invalid header values", lineno)
            header = (vals[0], vals[1], lineno)
            continue
        rows.append((lineno, _ints(line.split(), lineno)))

    if header is None:
        raise GraphFormatError("missing header", 1)
    n, m, hline = header
    if len(rows) > n:
        raise GraphFormatError(f"more than {n} vertex lines", rows[n][0])
    if len(rows) < n:
        last = rows[-1][0] if rows else hline
        raise GraphFormatError(f"expected {n} vertex lines, found {len(rows)}", last)

    adjacency = []
    for i, (lineno, nb) in enumerate(rows):
        seen = set()
        for j in nb:
            if j < 1 or j > n:
                raise GraphFormatError(f"neighbour {j} out of range 1..{n}", lineno)
            if j == i + 1:
                raise GraphFormatError(f"self-loop on vertex {j}", lineno)
            if j in seen:
                raise GraphFormatError(f"duplicate neighbour {j}", lineno)
            seen.add(j)
        adjacency.append(seen)
    for i, (lineno, nb) in enumerate(rows):
        for j in nb:
            if (i + 1) not in adjacency[j - 1]:
                raise GraphFormatError(
                    f"edge {i + 1}-{j} missing from vertex {j}'s list", lineno)
    degree_sum = sum(len(a) for a in adjacency)
    if degree_sum != 2 * m:
        raise GraphFormatError(f"header says {m} edges, lists give {degree_sum / 2:g}", hline)
    edges = [(i, j - 1) for i, (_, nb) in enumerate(rows) for j in nb if j - 1 > i]
    return Graph.from_edges(n, edges)
