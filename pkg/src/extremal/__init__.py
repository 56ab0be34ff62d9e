"""Extremal optimisation (tau-EO) for graph bipartitioning and the TSP.

Includes simulated-annealing baselines, exact small-instance oracles,
instance generators and a seeded benchmark harness.
"""
from .errors import CapacityError, FitError, InvalidStateError
from .exact import ExactResult, exact_partition, exact_tsp
from .graphs import (Graph, GeometricSpec, generate_geometric, generate_random,
                     mean_connectivity, read_graph, write_graph)
from .partition import PartitionState, cutsize, greedy_init, solve_partition_eo
from .rank import (EoConfig, FitnessHeap, RankSelector, RunResult, SelectionMode,
                   build_selector, heap_select, run_eo, sample_rank)
from .sa import SaSchedule, solve_partition_sa, solve_tsp_sa
from .tsp import (TourState, TspInstance, gen_euclidean, gen_random_matrix, solve_tsp_eo,
                  tour_length)

__all__ = [
    "CapacityError",
    "FitError",
    "InvalidStateError",
    "ExactResult",
    "exact_partition",
    "exact_tsp",
    "Graph",
    "GeometricSpec",
    "generate_geometric",
    "generate_random",
    "mean_connectivity",
    "read_graph",
    "write_graph",
    "PartitionState",
    "cutsize",
    "greedy_init",
    "solve_partition_eo",
    "EoConfig",
    "FitnessHeap",
    "RankSelector",
    "RunResult",
    "SelectionMode",
    "build_selector",
    "heap_select",
    "run_eo",
    "sample_rank",
    "SaSchedule",
    "solve_partition_sa",
    "solve_tsp_sa",
    "TourState",
    "TspInstance",
    "gen_euclidean",
    "gen_random_matrix",
    "solve_tsp_eo",
    "tour_length",
]

__version__ = "0.1.0"
