"""Experiment harness: instance sweeps, best-of-k runs, CSV results and analysis.

Every instance and every run gets a seed derived by hashing the tuple that
identifies it, so results do not depend on the order methods are listed in
or on which other cells a plan contains.
"""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CapacityError, FitError
from .exact import exact_partition, exact_tsp
from .graphs import GeometricSpec, generate_geometric
from .partition import solve_partition_eo
from .rank import EoConfig, RunResult, SelectionMode
from .sa import DEFAULT_IMBALANCE_WEIGHT, SaSchedule, solve_partition_sa, solve_tsp_sa
from .tsp import InstanceKind, gen_euclidean, gen_random_matrix, solve_tsp_eo

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentPlan",
    "ResultRecord",
    "ScalingFit",
    "derive_seed",
    "parse_plan",
    "read_plan",
    "make_instance",
    "run_plan",
    "write_records",
    "read_records",
    "format_records",
    "sa_relative_error",
    "fit_scaling",
    "export_trace",
    "default_tau",
]

PROBLEMS = ("partition", "tsp")
METHODS = ("eo", "sa", "exact")


def derive_seed(master_seed: int, *parts) -> int:
    """64-bit seed from ``master_seed`` and an identifying tuple."""
    text = "|".join([str(int(master_seed))] + [_canon(p) for p in parts])
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def _canon(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _r6(x: float) -> float:
    return float(format(x, ".6g"))


def default_tau(problem: str, kind: str | None = None) -> float:
    if problem == "partition":
        return 1.4
    return 4.0 if InstanceKind.parse(kind) is InstanceKind.EUCLIDEAN_TORUS else 4.4


# ----------------------------------------------------------------------------
# plan

@dataclass(frozen=True)
class ExperimentPlan:
    """What to run.

    ``eo_updates`` scales with ``n`` for partitioning and ``n**2`` for the
    TSP.  SA stage length defaults to ``16n`` (partitioning) or ``32n**2``
    (TSP), multiplied by ``sa_stage_multiplier``.
    """

    problem: str = "partition"
    sizes: tuple[int, ...] = (500, 1000, 2000)
    alphas: tuple[float, ...] = (4.5, 5.0, 6.0, 7.0, 8.0, 10.0)
    kinds: tuple[str, ...] = ("eucl",)
    instances_per_point: int = 8
    runs_per_instance: int = 8
    methods: tuple[str, ...] = ("eo", "sa")
    master_seed: int = 0
    tau: float | None = None
    eo_updates: int | None = None
    selection: str = "exact"
    sa_cooling: float | None = None
    sa_stage_multiplier: int | None = None
    sa_t0: float | None = None
    sa_max_moves: int = 0
    imbalance_weight: float = DEFAULT_IMBALANCE_WEIGHT

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"problem must be one of {PROBLEMS}")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if not self.sizes or min(self.sizes) < 1:
            raise ValueError("sizes must be positive")
        if self.instances_per_point < 1 or self.runs_per_instance < 1:
            raise ValueError("instance and run counts must be >= 1")
        if self.problem == "partition":
            if not self.alphas or min(self.alphas) <= 0:
                raise ValueError("partition plans need positive alphas")
            if any(n % 2 for n in self.sizes):
                raise ValueError("partition sizes must be even")
        else:
            if not self.kinds:
                raise ValueError("TSP plans need instance kinds")
            for k in self.kinds:
                InstanceKind.parse(k)
        SelectionMode.parse(self.selection)

    def points(self):
        """``(n, alpha, kind)`` cells in canonical order."""
        for n in self.sizes:
            if self.problem == "partition":
                for a in self.alphas:
                    yield n, float(a), None
            else:
                for k in self.kinds:
                    yield n, None, InstanceKind.parse(k).value


_LIST_INT = {"sizes"}
_LIST_FLOAT = {"alphas"}
_LIST_STR = {"kinds", "methods"}
_ALIASES = {"instances": "instances_per_point", "runs": "runs_per_instance", "seed": "master_seed"}


def parse_plan(text: str) -> ExperimentPlan:
    """Parse ``key = value`` lines; lists are comma-separated, ``#`` starts a comment."""
    kwargs = {}
    names = {f.name: f for f in fields(ExperimentPlan)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"plan line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in names:
            raise ValueError(f"plan line {lineno}: unknown key {key!r}")
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            if key in _LIST_INT:
                kwargs[key] = tuple(int(v) for v in items)
            elif key in _LIST_FLOAT:
                kwargs[key] = tuple(float(v) for v in items)
            elif key in _LIST_STR:
                kwargs[key] = tuple(v.lower() for v in items)
            elif key in ("problem", "selection"):
                kwargs[key] = value.lower()
            elif key in ("tau", "sa_cooling", "sa_t0"):
                kwargs[key] = None if value.lower() in ("auto", "default", "") else float(value)
            elif key in ("eo_updates", "sa_stage_multiplier"):
                kwargs[key] = None if value.lower() in ("auto", "default", "") else int(value)
            elif key == "imbalance_weight":
                kwargs[key] = float(value)
            else:
                kwargs[key] = int(value)
        except ValueError:
            raise ValueError(f"plan line {lineno}: bad value {value!r} for {key}") from None
    return ExperimentPlan(**kwargs)


def read_plan(path) -> ExperimentPlan:
    with open(path) as fh:
        return parse_plan(fh.read())


# ----------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class ResultRecord:
    problem: str
    method: str
    n: int
    alpha: float | None
    kind: str | None
    instance: int
    best: float | None
    mean: float | None
    runs: int
    instance_seed: int
    params: str
    status: str = "ok"
    wall_time: float | None = field(default=None, compare=False)

    def sort_key(self):
        return (self.problem, self.method, self.n,
                self.alpha if self.alpha is not None else -1.0,
                self.kind or "", self.instance)


_COLUMNS = ["problem", "method", "n", "alpha", "kind", "instance", "best", "mean", "runs",
            "instance_seed", "status", "params"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


def format_records(records, timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = _COLUMNS + (["wall_time"] if timing else [])
    w.writerow(cols)
    for r in sorted(records, key=ResultRecord.sort_key):
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def write_records(records, path, timing: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_records(records, timing))


def read_records(path) -> list[ResultRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    opt_float = lambda s: float(s) if s != "" else None
    for row in rows:
        out.append(ResultRecord(
            problem=row["problem"], method=row["method"], n=int(row["n"]),
            alpha=opt_float(row["alpha"]), kind=row["kind"] or None,
            instance=int(row["instance"]), best=opt_float(row["best"]),
            mean=opt_float(row["mean"]), runs=int(row["runs"]),
            instance_seed=int(row["instance_seed"]), params=row["params"],
            status=row["status"], wall_time=opt_float(row.get("wall_time", "") or "")))
    return out


# ----------------------------------------------------------------------------
# running

def make_instance(problem: str, n: int, alpha: float | None, kind: str | None, seed: int):
    if problem == "partition":
        return generate_geometric(GeometricSpec(n, alpha, seed))
    if InstanceKind.parse(kind) is InstanceKind.EUCLIDEAN_TORUS:
        return gen_euclidean(n, seed)
    return gen_random_matrix(n, seed)


def _method_setup(plan: ExperimentPlan, method: str, n: int, kind: str | None):
    """Returns ``(params echo, solver(instance, seed) -> RunResult)``."""
    p = plan.problem
    if method == "eo":
        tau = plan.tau if plan.tau is not None else default_tau(p, kind)
        factor = plan.eo_updates if plan.eo_updates is not None else (200 if p == "partition" else 16)
        updates = factor * (n if p == "partition" else n * n)
        echo = f"tau={tau:g};updates={updates};selection={plan.selection}"
        solve = solve_partition_eo if p == "partition" else solve_tsp_eo

        def run(inst, seed):
            return solve(inst, EoConfig(tau, updates, seed, plan.selection))
        return echo, run
    if method == "sa":
        cooling = plan.sa_cooling if plan.sa_cooling is not None else (0.95 if p == "partition" else 0.9)
        mult = plan.sa_stage_multiplier if plan.sa_stage_multiplier is not None else (4 if p == "partition" else 1)
        stage = (16 * n if p == "partition" else 32 * n * n) * mult
        t0 = "auto" if plan.sa_t0 is None else f"{plan.sa_t0:g}"
        echo = f"cooling={cooling:g};stage={stage};t0={t0};max_moves={plan.sa_max_moves}"
        if p == "partition":
            echo += f";imbalance_weight={plan.imbalance_weight:g}"

        def run(inst, seed):
            sched = SaSchedule(t0=plan.sa_t0, cooling=cooling, stage_length=stage,
                               seed=seed, max_moves=plan.sa_max_moves)
            if p == "partition":
                return solve_partition_sa(inst, sched, plan.imbalance_weight)
            return solve_tsp_sa(inst, sched)
        return echo, run
    return "exact", None


def run_plan(plan: ExperimentPlan, out_path=None, timing: bool = False) -> list[ResultRecord]:
    """Run every method on identical instances; return (and optionally write) sorted records."""
    records = []
    for n, alpha, kind in plan.points():
        param = alpha if alpha is not None else kind
        for idx in range(plan.instances_per_point):
            iseed = derive_seed(plan.master_seed, "instance", plan.problem, n, param, idx)
            inst = make_instance(plan.problem, n, alpha, kind, iseed)
            for method in plan.methods:
                echo, run = _method_setup(plan, method, n, kind)
                start = time.perf_counter()
                common = dict(problem=plan.problem, method=method, n=n, alpha=alpha, kind=kind,
                              instance=idx, instance_seed=iseed, params=echo)
                if method == "exact":
                    try:
                        res = exact_partition(inst) if plan.problem == "partition" else exact_tsp(inst)
                    except CapacityError as exc:
                        log.warning("n=%d instance %d: %s", n, idx, exc)
                        records.append(ResultRecord(best=None, mean=None, runs=1, status="capacity",
                                                    wall_time=time.perf_counter() - start, **common))
                        continue
                    cost = _r6(float(res.optimum))
                    records.append(ResultRecord(best=cost, mean=cost, runs=1,
                                                wall_time=time.perf_counter() - start, **common))
                    continue
                costs = [run(inst, derive_seed(plan.master_seed, method, plan.problem, n, param,
                                               idx, r)).best_cost
                         for r in range(plan.runs_per_instance)]
                records.append(ResultRecord(best=_r6(float(min(costs))),
                                            mean=_r6(float(np.mean(costs))),
                                            runs=len(costs), wall_time=time.perf_counter() - start,
                                            **common))
                log.info("%s %s n=%d %s inst=%d best=%g", plan.problem, method, n, param, idx,
                         min(costs))
    records.sort(key=ResultRecord.sort_key)
    if out_path is not None:
        write_records(records, out_path, timing)
    return records


def best_of(runs: list[RunResult]) -> RunResult:
    return min(runs, key=lambda r: r.best_cost)


# ----------------------------------------------------------------------------
# analysis

def _cell(r: ResultRecord):
    return (r.problem, r.n, r.alpha if r.alpha is not None else r.kind, r.instance)


def sa_relative_error(records, sa: str = "sa", reference: str = "eo"):
    """Mean over instances of ``(SA - best) / max(best, 1)``, per ``(n, alpha)``.

    ``best`` is the better of the two methods on the instance.
    """
    by = {m: {_cell(r): r.best for r in records if r.method == m and r.status == "ok"}
          for m in (sa, reference)}
    if not by[sa] or not by[reference]:
        raise ValueError(f"records need both {sa!r} and {reference!r} results")
    if set(by[sa]) != set(by[reference]):
        missing = sorted(set(by[sa]) ^ set(by[reference]), key=str)
        raise ValueError(f"unpaired instances: {missing[:3]}")
    groups = defaultdict(list)
    for cell, s in by[sa].items():
        e = by[reference][cell]
        best = min(s, e)
        groups[(cell[1], cell[2])].append((s - best) / max(best, 1.0))
    order = lambda kv: (kv[0][0], isinstance(kv[0][1], str), kv[0][1])
    return [(n, p, float(np.mean(v))) for (n, p), v in sorted(groups.items(), key=order)]


@dataclass(frozen=True)
class ScalingFit:
    """``<m> = amplitude * N**nu * (alpha - alpha0)**beta`` in log space."""

    nu: float
    alpha0: float
    beta: float
    amplitude: float
    residual: float
    points: int = 0

    def predict(self, n, alpha):
        return self.amplitude * np.power(n, self.nu) * np.power(np.asarray(alpha) - self.alpha0, self.beta)


def _mean_cutsizes(records, method):
    acc = defaultdict(list)
    for r in records:
        if r.method == method and r.status == "ok" and r.alpha is not None:
            acc[(r.n, r.alpha)].append(r.best)
    return {k: float(np.mean(v)) for k, v in acc.items()}


def fit_scaling(records, nu: float = 0.6, method: str = "eo", fit_nu: bool = False) -> ScalingFit:
    """Fit the finite-size scaling form to instance-averaged best cutsizes.

    For each trial ``alpha0`` the amplitude and ``beta`` (and ``nu`` when
    ``fit_nu``) follow from linear least squares on logs; ``alpha0`` is
    located by a grid scan refined with golden-section search.
    """
    means = _mean_cutsizes(records, method)
    pts = [(n, a, m) for (n, a), m in means.items() if m > 0]
    sizes = {p[0] for p in pts}
    alphas = {p[1] for p in pts}
    if len(sizes) < 2 or len(alphas) < 4:
        raise FitError(f"need >= 2 sizes and >= 4 alphas with positive cutsizes, "
                       f"have {len(sizes)} and {len(alphas)}")
    n_arr = np.array([p[0] for p in pts], dtype=float)
    a_arr = np.array([p[1] for p in pts], dtype=float)
    m_arr = np.array([p[2] for p in pts], dtype=float)
    amin = a_arr.min()
    span = max(10.0, 2.0 * (a_arr.max() - amin))

    def solve(alpha0):
        gap = a_arr - alpha0
        if np.any(gap <= 0):
            return None
        cols = [np.ones_like(gap), np.log(gap)]
        y = np.log(m_arr)
        if fit_nu:
            cols.insert(1, np.log(n_arr))
        else:
            y = y - nu * np.log(n_arr)
        design = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = float(np.sum((design @ coef - y) ** 2))
        return coef, resid

    def objective(log_gap):
        out = solve(amin - math.exp(log_gap))
        return math.inf if out is None else out[1]

    grid = np.linspace(math.log(1e-6), math.log(span), 601)
    vals = np.array([objective(x) for x in grid])
    if not np.isfinite(vals).any():
        raise FitError("no admissible alpha0")
    k = int(np.argmin(vals))
    if 0 < k < len(grid) - 1:
        res = minimize_scalar(objective, bracket=(grid[k - 1], grid[k], grid[k + 1]),
                              method="golden", options={"xtol": 1e-10})
        log_gap = res.x if res.fun <= vals[k] else grid[k]
    else:
        log_gap = grid[k]
    alpha0 = amin - math.exp(log_gap)
    coef, resid = solve(alpha0)
    if fit_nu:
        amp, nu_fit, beta = coef
    else:
        (amp, beta), nu_fit = coef, nu
    return ScalingFit(nu=float(nu_fit), alpha0=float(alpha0), beta=float(beta),
                      amplitude=float(math.exp(amp)), residual=resid, points=len(pts))


def export_trace(run: RunResult, path) -> None:
    """CSV ``bin,min_cost,max_cost,best_so_far`` from a run's trace."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "min_cost", "max_cost", "best_so_far"])
        for (b, lo, hi), best in zip(run.trace, run.best_so_far()):
            w.writerow([b, _fmt(float(lo)), _fmt(float(hi)), _fmt(float(best))])
