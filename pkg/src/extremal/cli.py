"""Command-line front end.

Exit codes: 0 success, 2 bad arguments or input, 3 capacity error, 4 fit failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import bench
from .errors import CapacityError, FitError
from .exact import exact_partition, exact_tsp
from .graphs import GeometricSpec, generate_geometric, read_graph, write_graph
from .partition import cutsize, solve_partition_eo, write_partition
from .rank import EoConfig, RunResult
from .sa import DEFAULT_IMBALANCE_WEIGHT, SaSchedule, solve_partition_sa, solve_tsp_sa
from .tsp import (gen_euclidean, gen_random_matrix, read_instance,
                  solve_tsp_eo, tour_length, write_instance, write_tour)

EXIT_ARGS = 2
EXIT_CAPACITY = 3
EXIT_FIT = 4


def _t0(value: str):
    if value == "auto":
        return None
    t = float(value)
    if t < 0:
        raise argparse.ArgumentTypeError("t0 must be >= 0")
    return t


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="extremal", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-graph", help="random geometric graph")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out", required=True)

    s = sub.add_parser("gen-tsp", help="random TSP instance")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--kind", choices=["eucl", "rand"], required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("-o", "--out", required=True)

    s = sub.add_parser("solve", help="solve one instance, best of --runs")
    s.add_argument("--problem", choices=["partition", "tsp"], required=True)
    s.add_argument("--method", choices=["eo", "sa", "exact"], required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--tau", type=float, default=None)
    s.add_argument("--updates", type=int, default=None,
                   help="EO updates per run (default 200n partition, 16n^2 TSP)")
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--selection", choices=["exact", "heap"], default="exact")
    s.add_argument("--t0", type=_t0, default=None, help="'auto' or a temperature")
    s.add_argument("--cooling", type=float, default=None)
    s.add_argument("--stage-length", type=int, default=None)
    s.add_argument("--imbalance-weight", type=float, default=DEFAULT_IMBALANCE_WEIGHT)
    s.add_argument("--max-moves", type=int, default=0)
    s.add_argument("--run-json", default=None, help="write the best run (with trace) as JSON")
    s.add_argument("-o", "--out", required=True)

    s = sub.add_parser("bench", help="run an experiment plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--timing", action="store_true", help="add a wall_time column")
    s.add_argument("-o", "--out", required=True)

    s = sub.add_parser("fit-scaling", help="fit <m> ~ N^nu (alpha - alpha0)^beta")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--nu", type=float, default=0.6)
    s.add_argument("--method", default="eo")
    s.add_argument("--free-nu", action="store_true")

    s = sub.add_parser("sa-error", help="SA error relative to the best of EO and SA")
    s.add_argument("--in", dest="inp", required=True)

    s = sub.add_parser("trace", help="export a run trace as CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("-o", "--out", required=True)
    return p


def _solve(args) -> int:
    if args.runs < 1:
        raise ValueError("--runs must be >= 1")
    if args.problem == "partition":
        inst = read_graph(args.inp)
        n = inst.n
        kind = None
    else:
        inst = read_instance(args.inp)
        n = inst.n
        kind = inst.kind.value

    if args.method == "exact":
        res = exact_partition(inst) if args.problem == "partition" else exact_tsp(inst)
        results = [RunResult(best_cost=res.optimum, best_config=res.witness, trace=[],
                             updates_used=0, wall_time=0.0, initial_cost=res.optimum,
                             method="exact")]
    else:
        seeds = [bench.derive_seed(args.seed, "run", r) for r in range(args.runs)]
        if args.method == "eo":
            tau = args.tau if args.tau is not None else bench.default_tau(args.problem, kind)
            updates = args.updates
            if updates is None:
                updates = 200 * n if args.problem == "partition" else 16 * n * n
            solve = solve_partition_eo if args.problem == "partition" else solve_tsp_eo
            results = [solve(inst, EoConfig(tau, updates, s, args.selection)) for s in seeds]
        else:
            cooling = args.cooling if args.cooling is not None else (
                0.95 if args.problem == "partition" else 0.9)
            results = []
            for s in seeds:
                sched = SaSchedule(t0=args.t0, cooling=cooling, stage_length=args.stage_length,
                                   seed=s, max_moves=args.max_moves)
                if args.problem == "partition":
                    results.append(solve_partition_sa(inst, sched, args.imbalance_weight))
                else:
                    results.append(solve_tsp_sa(inst, sched))

    best = bench.best_of(results)
    if args.problem == "partition":
        write_partition(best.best_config, args.out)
        check = cutsize(inst, best.best_config)
    else:
        write_tour(best.best_config, args.out)
        check = tour_length(inst, best.best_config)
    if args.run_json:
        with open(args.run_json, "w") as fh:
            json.dump(best.to_dict(), fh)
    costs = [r.best_cost for r in results]
    print("problem,method,n,runs,best,mean,seed")
    print(f"{args.problem},{args.method},{n},{len(results)},{check:.6g},{np.mean(costs):.6g},{args.seed}")
    return 0


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    cmd = args.command
    if cmd == "gen-graph":
        g = generate_geometric(GeometricSpec(args.n, args.alpha, args.seed))
        write_graph(g, args.out)
        print(f"n={g.n} m_edges={g.m_edges} mean_connectivity={2 * g.m_edges / g.n:.6g}")
    elif cmd == "gen-tsp":
        gen = gen_euclidean if args.kind == "eucl" else gen_random_matrix
        write_instance(gen(args.n, args.seed), args.out)
    elif cmd == "solve":
        return _solve(args)
    elif cmd == "bench":
        records = bench.run_plan(bench.read_plan(args.plan), args.out, timing=args.timing)
        print(f"{len(records)} records written to {args.out}")
    elif cmd == "fit-scaling":
        fit = bench.fit_scaling(bench.read_records(args.inp), nu=args.nu, method=args.method,
                                fit_nu=args.free_nu)
        print("nu,alpha0,beta,amplitude,residual,points")
        print(f"{fit.nu:.6g},{fit.alpha0:.6g},{fit.beta:.6g},{fit.amplitude:.6g},"
              f"{fit.residual:.6g},{fit.points}")
    elif cmd == "sa-error":
        print("n,alpha,error")
        for n, a, err in bench.sa_relative_error(bench.read_records(args.inp)):
            print(f"{n},{a},{err:.6g}")
    elif cmd == "trace":
        with open(args.inp) as fh:
            bench.export_trace(RunResult.from_dict(json.load(fh)), args.out)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
