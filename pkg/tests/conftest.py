import pytest

from extremal.graphs import Graph
from extremal.rank import make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def two_triangles():
    return Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle(n):
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def brute_cut(graph, side):
    """Independent cutsize oracle: scan adjacency lists."""
    total = 0
    for i, nb in enumerate(graph.adjacency):
        for j in nb:
            if i < j and side[i] != side[j]:
                total += 1
    return total


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one summary line per acceptance criterion."""
    def report(number, passed, detail):
        _ACCEPTANCE_LINES.append((number, f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"))
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
