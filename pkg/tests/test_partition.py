import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_cut, complete, cycle
from extremal.exact import exact_partition
from extremal.graphs import Graph, GeometricSpec, generate_geometric, generate_random
from extremal.partition import (PartitionState, cutsize, eo_swap_step, greedy_init,
                                random_balanced, read_partition, solve_partition_eo,
                                vertex_fitness, write_partition)
from extremal.rank import EoConfig, build_selector, make_rng


class TestGreedyInit:
    def test_fills_components(self, two_triangles):
        for seed in range(10):
            side = greedy_init(two_triangles, seed)
            assert cutsize(two_triangles, side) == 0
            assert np.count_nonzero(side) == 3

    def test_edgeless(self):
        g = Graph.from_edges(4, [])
        side = greedy_init(g, 1)
        assert np.count_nonzero(side) == 2 and cutsize(g, side) == 0

    def test_path_from_first_vertex(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
        side = greedy_init(g, 0, start=0)
        assert set(np.flatnonzero(side == 0)) == {0, 1}
        assert cutsize(g, side) == 1

    def test_odd_n(self, triangle):
        with pytest.raises(ValueError):
            greedy_init(triangle, 0)

    def test_deterministic(self):
        g = generate_geometric(GeometricSpec(200, 3.0, 2))
        np.testing.assert_array_equal(greedy_init(g, 5), greedy_init(g, 5))


class TestFitnessAndCut:
    def test_vertex_fitness(self):
        # vertex 0: neighbours 1, 2, 3 on its side and 4 across; 5 isolated
        g = Graph.from_edges(8, [(0, 1), (0, 2), (0, 3), (0, 4), (6, 7)])
        side = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=np.int8)
        st_ = PartitionState(g, side)
        assert vertex_fitness(st_, 0) == 0.75
        assert vertex_fitness(st_, 5) == 1.0
        assert vertex_fitness(st_, 4) == 0.0
        h = Graph.from_edges(4, [(0, 2), (0, 3)])
        s2 = PartitionState(h, np.array([0, 0, 1, 1], dtype=np.int8))
        assert vertex_fitness(s2, 0) == 0.0

    def test_cut_k4(self):
        assert cutsize(complete(4), [0, 0, 1, 1]) == 4

    def test_cut_two_triangles(self, two_triangles):
        assert cutsize(two_triangles, [0, 0, 0, 1, 1, 1]) == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_cut_matches_scan(self, seed):
        g = generate_random(16, 4, seed)
        side = random_balanced(16, make_rng(seed))
        assert cutsize(g, side) == brute_cut(g, side)

    def test_unbalanced_rejected(self):
        with pytest.raises(ValueError):
            PartitionState(cycle(4), [0, 0, 0, 1])


class TestSwap:
    @pytest.mark.parametrize("mode", ["exact", "heap"])
    def test_worst_vertex_at_large_tau(self, mode):
        g = generate_geometric(GeometricSpec(100, 5.0, 1))
        rng = make_rng(2)
        st_ = PartitionState(g, greedy_init(g, rng), mode, rng)
        sel = build_selector(100, 60.0)
        for _ in range(200):
            fit = st_.fitness()
            u, v = st_.draw_pair(sel, rng)
            assert fit[u] == fit.min()
            assert st_.side[u] != st_.side[v]
            if mode == "exact":
                # v is a worst vertex of the other side
                other = st_.side != st_.side[u]
                assert fit[v] == fit[other].min()
            st_.swap(u, v, rng)

    def test_isolated_swap_keeps_cut(self):
        g = Graph.from_edges(6, [(0, 1), (3, 4)])
        st_ = PartitionState(g, [0, 0, 0, 1, 1, 1])
        before = st_.cost
        st_.swap(2, 5)
        assert st_.cost == before and st_.check()

    def test_adjacent_swap_correction(self):
        g = Graph.from_edges(2, [(0, 1)])
        st_ = PartitionState(g, [0, 1])
        st_.swap(0, 1)
        assert st_.cost == 1 and st_.check()

    @pytest.mark.parametrize("mode", ["exact", "heap"])
    @settings(max_examples=15, deadline=None)
    @given(n=st.integers(1, 32).map(lambda k: 2 * k), alpha=st.floats(0.5, 10),
           seed=st.integers(0, 2**32))
    def test_incremental_matches_recompute(self, mode, n, alpha, seed):
        g = generate_random(n, min(alpha, n - 1), seed)
        rng = make_rng(seed)
        st_ = PartitionState(g, random_balanced(n, rng), mode, rng)
        sel = build_selector(n, float(rng.uniform(0, 3)))
        for _ in range(200):
            eo_swap_step(st_, sel, rng)
            assert st_.counts == (n // 2, n // 2)
            assert int(st_.b.sum()) % 2 == 0
        assert st_.check()

    def test_many_swaps_exact(self):
        g = generate_random(64, 5, 3)
        rng = make_rng(4)
        st_ = PartitionState(g, random_balanced(64, rng))
        sel = build_selector(64, 1.2)
        for _ in range(100):
            st_.advance(100, sel, rng)
            assert st_.counts == (32, 32)
        assert st_.check()
        assert st_.best_cost == cutsize(g, st_.best_side)


class TestSolve:
    def test_zero_updates(self):
        g = generate_geometric(GeometricSpec(100, 5, 1))
        res = solve_partition_eo(g, EoConfig(1.4, 0, 3))
        assert res.best_cost == res.initial_cost == cutsize(g, greedy_init(g, make_rng(3)))

    @pytest.mark.parametrize("mode", ["exact", "heap"])
    def test_deterministic_and_consistent(self, mode):
        g = generate_geometric(GeometricSpec(200, 5, 1))
        a = solve_partition_eo(g, EoConfig(1.4, 5000, 11, mode))
        b = solve_partition_eo(g, EoConfig(1.4, 5000, 11, mode))
        assert a == b
        assert a.best_cost == cutsize(g, a.best_config)
        assert np.count_nonzero(a.best_config) == 100
        bsf = a.best_so_far()
        assert all(x >= y for x, y in zip(bsf, bsf[1:]))
        assert a.best_cost <= min(lo for _, lo, _ in a.trace)

    def test_uniform_tau_valid(self):
        g = generate_geometric(GeometricSpec(100, 5, 2))
        res = solve_partition_eo(g, EoConfig(0.0, 2000, 1))
        assert res.best_cost <= res.initial_cost

    def test_small_graphs_reach_optimum(self):
        hits = 0
        for k in range(10):
            g = generate_random(16, 4, 100 + k)
            opt = exact_partition(g).optimum
            best = min(solve_partition_eo(g, EoConfig(1.4, 3200, s)).best_cost for s in range(8))
            assert best >= opt
            hits += best == opt
        assert hits >= 9

    def test_dense_geometric_bound(self):
        g = generate_geometric(GeometricSpec(500, 8, 4))
        res = solve_partition_eo(g, EoConfig(1.4, 200 * 500, 1))
        assert 0 <= res.best_cost <= 2 * res.initial_cost
        assert res.best_cost < 40

    def test_late_fluctuations(self):
        g = generate_geometric(GeometricSpec(500, 5, 7))
        res = solve_partition_eo(g, EoConfig(1.4, 200 * 500, 2))
        late = res.trace[-10:]
        assert all(hi - lo > 0 for _, lo, hi in late)
        bsf = res.best_so_far()
        assert bsf[-1] == bsf[50]  # best found in the first half

    def test_partition_file(self, tmp_path):
        side = np.array([0, 1, 1, 0], dtype=np.int8)
        p = tmp_path / "p.txt"
        write_partition(side, p)
        assert p.read_text() == "1 0\n2 1\n3 1\n4 0\n"
        np.testing.assert_array_equal(read_partition(p), side)


@pytest.mark.parametrize("mode", ["exact", "heap"])
def test_conditional_fallback_matches_rejection(mode):
    from extremal.partition import _EXACT, _HEAP, _select, _select_opposite
    from extremal.rank import draw_rank
    g = generate_random(20, 3, 8)
    rng = make_rng(9)
    st_ = PartitionState(g, random_balanced(20, rng), mode, rng)
    sel = build_selector(20, 1.0)
    m = _EXACT if mode == "exact" else _HEAP
    args = (m, st_.members, st_.count, st_.heap)
    trials = 40_000
    direct = np.zeros(20)
    reject = np.zeros(20)
    for _ in range(trials):
        direct[_select_opposite(0, sel.probs, st_.side, m, st_.members, st_.count, st_.scount,
                                st_.heap, rng)] += 1
        while True:
            v = _select(draw_rank(sel.cdf, rng), *args, rng)
            if st_.side[v] == 1:
                break
        reject[v] += 1
    assert direct[st_.side == 0].sum() == 0
    np.testing.assert_allclose(direct / trials, reject / trials, atol=0.01)
