import itertools

import numpy as np
import pytest

from conftest import brute_cut, complete, cycle
from extremal.errors import CapacityError
from extremal.exact import MAX_PARTITION_N, MAX_TSP_N, exact_partition, exact_tsp
from extremal.graphs import generate_random
from extremal.partition import solve_partition_eo
from extremal.rank import EoConfig
from extremal.sa import SaSchedule, solve_tsp_sa
from extremal.tsp import gen_euclidean, gen_random_matrix, is_valid_tour, solve_tsp_eo, tour_length


def brute_partition(graph):
    n = graph.n
    best = None
    for half in itertools.combinations(range(1, n), n // 2 - 1):
        side = np.ones(n, dtype=np.int8)
        side[[0, *half]] = 0
        cut = brute_cut(graph, side)
        best = cut if best is None else min(best, cut)
    return best


def brute_tsp(inst):
    n = inst.n
    return min(tour_length(inst, (0, *p)) for p in itertools.permutations(range(1, n))
               if p[0] < p[-1])


class TestExactPartition:
    def test_two_triangles(self, two_triangles):
        res = exact_partition(two_triangles)
        assert res.optimum == 0
        assert brute_cut(two_triangles, res.witness) == 0

    def test_k4(self):
        assert exact_partition(complete(4)).optimum == 4

    def test_c6(self):
        assert exact_partition(cycle(6)).optimum == 2

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        g = generate_random(10, 4.0, seed)
        res = exact_partition(g)
        assert res.optimum == brute_partition(g)
        assert np.count_nonzero(res.witness) == 5
        assert brute_cut(g, res.witness) == res.optimum

    def test_counts_every_split_once(self):
        res = exact_partition(cycle(12))
        assert res.nodes_explored == 462  # C(11, 5)

    def test_lower_bounds_eo(self):
        for seed in range(5):
            g = generate_random(16, 4.0, seed)
            opt = exact_partition(g).optimum
            eo = solve_partition_eo(g, EoConfig(1.4, 400, seed=seed)).best_cost
            assert opt <= eo

    def test_capacity(self):
        with pytest.raises(CapacityError):
            exact_partition(cycle(MAX_PARTITION_N + 2))

    def test_odd(self, triangle):
        with pytest.raises(ValueError):
            exact_partition(triangle)


class TestHeldKarp:
    def test_three_cities(self):
        inst = gen_random_matrix(3, 0)
        d = inst.dist
        res = exact_tsp(inst)
        assert res.optimum == pytest.approx(d[0, 1] + d[1, 2] + d[0, 2], rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_four_cities(self, seed):
        inst = gen_random_matrix(4, seed)
        d = inst.dist
        tours = [d[0, 1] + d[1, 2] + d[2, 3] + d[3, 0],
                 d[0, 1] + d[1, 3] + d[3, 2] + d[2, 0],
                 d[0, 2] + d[2, 1] + d[1, 3] + d[3, 0]]
        assert exact_tsp(inst).optimum == pytest.approx(min(tours), rel=1e-12)

    @pytest.mark.parametrize("gen", [gen_random_matrix, gen_euclidean])
    def test_ten_cities_brute_force(self, gen):
        inst = gen(10, 7)
        res = exact_tsp(inst)
        assert res.optimum == pytest.approx(brute_tsp(inst), rel=1e-12)
        assert is_valid_tour(res.witness, 10)
        assert tour_length(inst, res.witness) == pytest.approx(res.optimum, rel=1e-12)

    @pytest.mark.parametrize("n", [5, 6, 7, 8])
    def test_small_brute_force(self, n):
        for seed in range(3):
            inst = gen_random_matrix(n, seed)
            assert exact_tsp(inst).optimum == pytest.approx(brute_tsp(inst), rel=1e-12)

    def test_lower_bounds_heuristics(self):
        for seed in range(3):
            inst = gen_euclidean(12, seed)
            opt = exact_tsp(inst).optimum
            eo = solve_tsp_eo(inst, EoConfig(4.0, 500, seed=seed)).best_cost
            sa = solve_tsp_sa(inst, SaSchedule(seed=seed, max_moves=2000)).best_cost
            assert opt <= eo * (1 + 1e-9) and opt <= sa * (1 + 1e-9)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            exact_tsp(gen_euclidean(MAX_TSP_N + 1, 0))
