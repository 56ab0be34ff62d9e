import csv
from dataclasses import replace

import numpy as np
import pytest

from extremal.bench import (ExperimentPlan, ResultRecord, derive_seed, export_trace, fit_scaling,
                            format_records, parse_plan, read_records, run_plan,
                            sa_relative_error, write_records)
from extremal.errors import FitError
from extremal.graphs import generate_geometric, GeometricSpec
from extremal.partition import solve_partition_eo
from extremal.rank import EoConfig, RunResult


def rec(method, best, n=500, alpha=4.5, instance=0, mean=None, **kw):
    return ResultRecord(problem="partition", method=method, n=n, alpha=alpha, kind=None,
                        instance=instance, best=best, mean=best if mean is None else mean,
                        runs=1, instance_seed=0, params="", **kw)


def synthetic(nu=0.6, alpha0=4.1, beta=1.4, amp=1.0):
    return [rec("eo", amp * n ** nu * (a - alpha0) ** beta, n=n, alpha=a)
            for n in (500, 1000, 2000) for a in (4.5, 5.0, 6.0, 7.0, 8.0, 10.0)]


TINY = ExperimentPlan(problem="partition", sizes=(16,), alphas=(4.0,), instances_per_point=3,
                      runs_per_instance=2, methods=("exact", "eo", "sa"), master_seed=4,
                      eo_updates=50)


class TestPlan:
    def test_parse(self):
        plan = parse_plan("""
            # comment
            problem = tsp
            sizes = 16, 32
            kinds = eucl, RAND
            instances = 4
            runs = 10   # trailing comment
            methods = eo, sa, exact
            seed = 9
            tau = auto
            sa_cooling = 0.8
        """)
        assert plan.problem == "tsp" and plan.sizes == (16, 32)
        assert plan.kinds == ("eucl", "rand")
        assert plan.instances_per_point == 4 and plan.runs_per_instance == 10
        assert plan.master_seed == 9 and plan.tau is None and plan.sa_cooling == 0.8
        assert list(plan.points()) == [(16, None, "eucl"), (16, None, "rand"),
                                       (32, None, "eucl"), (32, None, "rand")]

    @pytest.mark.parametrize("text", ["nonsense", "colour = red", "sizes = a, b",
                                      "methods = eo, ga", "instances = 0", "sizes = 15",
                                      "problem = tsp\nkinds = torus"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            parse_plan(text)


class TestSeeds:
    def test_pure(self):
        assert derive_seed(1, "eo", 500, 4.5, 3) == derive_seed(1, "eo", 500, 4.5, 3)
        assert derive_seed(1, "eo", 500, 4.5, 3) != derive_seed(2, "eo", 500, 4.5, 3)
        assert derive_seed(1, "eo", 500, 4.5, 3) != derive_seed(1, "sa", 500, 4.5, 3)
        assert 0 <= derive_seed(0) < 2 ** 64

    def test_method_order_irrelevant(self):
        a = run_plan(TINY)
        b = run_plan(replace(TINY, methods=("sa", "exact", "eo")))
        assert a == b
        only_eo = run_plan(replace(TINY, methods=("eo",)))
        assert only_eo == [r for r in a if r.method == "eo"]


class TestRunPlan:
    def test_eo_bounded_by_exact(self):
        recs = run_plan(replace(TINY, instances_per_point=5, methods=("exact", "eo")))
        exact = {r.instance: r.best for r in recs if r.method == "exact"}
        assert len(exact) == 5
        for r in recs:
            assert r.best <= r.mean
            if r.method == "eo":
                assert r.best >= exact[r.instance]

    def test_rerun_byte_identical(self, tmp_path):
        run_plan(TINY, tmp_path / "a.csv")
        run_plan(TINY, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert b"\r" not in (tmp_path / "a.csv").read_bytes()

    def test_capacity_is_per_record(self):
        plan = ExperimentPlan(problem="tsp", sizes=(20,), kinds=("eucl",), instances_per_point=1,
                              runs_per_instance=1, methods=("exact", "eo"), eo_updates=1)
        recs = run_plan(plan)
        status = {r.method: r.status for r in recs}
        assert status == {"exact": "capacity", "eo": "ok"}

    def test_round_trip(self, tmp_path):
        recs = run_plan(TINY)
        for timing in (False, True):
            path = tmp_path / f"r{timing}.csv"
            write_records(recs, path, timing)
            back = read_records(path)
            assert back == recs
            assert format_records(back, timing) == path.read_text()

    def test_round_trip_tsp_and_missing(self, tmp_path):
        recs = [ResultRecord("tsp", "exact", 20, None, "rand", 0, None, None, 1, 2**63 + 5,
                             "exact", "capacity"),
                ResultRecord("tsp", "eo", 20, None, "rand", 0, 2.07713, 2.1, 10, 2**63 + 5,
                             "tau=4.4", wall_time=1.5)]
        write_records(recs, tmp_path / "t.csv")
        assert read_records(tmp_path / "t.csv") == sorted(recs, key=ResultRecord.sort_key)


class TestSaError:
    def test_equal_is_zero(self):
        recs = [rec(m, 7, instance=i) for m in ("eo", "sa") for i in range(3)]
        assert sa_relative_error(recs) == [(500, 4.5, 0.0)]

    def test_single_instance(self):
        (row,) = sa_relative_error([rec("eo", 10), rec("sa", 12)])
        assert row[2] == pytest.approx(0.2)

    def test_zero_floor(self):
        (row,) = sa_relative_error([rec("eo", 0), rec("sa", 3)])
        assert row[2] == 3.0

    def test_sa_better(self):
        (row,) = sa_relative_error([rec("eo", 12), rec("sa", 10)])
        assert row[2] == 0.0

    def test_missing_pairing(self):
        with pytest.raises(ValueError):
            sa_relative_error([rec("eo", 10), rec("sa", 12), rec("eo", 9, instance=1)])
        with pytest.raises(ValueError):
            sa_relative_error([rec("eo", 10)])


class TestScalingFit:
    def test_recovers_synthetic(self):
        fit = fit_scaling(synthetic())
        assert fit.alpha0 == pytest.approx(4.1, abs=0.01)
        assert fit.beta == pytest.approx(1.4, abs=0.01)
        assert fit.amplitude == pytest.approx(1.0, rel=1e-4)
        assert fit.residual < 1e-12

    def test_recovers_with_amplitude(self):
        fit = fit_scaling(synthetic(alpha0=3.8, beta=1.2, amp=0.05))
        assert fit.alpha0 == pytest.approx(3.8, abs=1e-4)
        assert fit.beta == pytest.approx(1.2, abs=1e-4)

    def test_free_nu(self):
        fit = fit_scaling(synthetic(nu=0.7), fit_nu=True)
        assert fit.nu == pytest.approx(0.7, abs=1e-4)
        assert fit.alpha0 == pytest.approx(4.1, abs=1e-3)

    def test_prediction(self):
        fit = fit_scaling(synthetic())
        assert fit.predict(1000, 6.0) == pytest.approx(1000 ** 0.6 * 1.9 ** 1.4, rel=1e-4)

    def test_single_alpha_fails(self):
        with pytest.raises(FitError):
            fit_scaling([r for r in synthetic() if r.alpha == 5.0])

    def test_single_size_fails(self):
        with pytest.raises(FitError):
            fit_scaling([r for r in synthetic() if r.n == 500])


class TestTrace:
    def test_empty(self, tmp_path):
        run = RunResult(best_cost=3, best_config=np.zeros(4), trace=[], updates_used=0,
                        wall_time=0.0, initial_cost=3.0, seed=0)
        export_trace(run, tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == "bin,min_cost,max_cost,best_so_far\n"

    def test_best_non_increasing(self, tmp_path):
        g = generate_geometric(GeometricSpec(500, 5.0, 3))
        run = solve_partition_eo(g, EoConfig(1.4, 50_000, seed=1))
        export_trace(run, tmp_path / "t.csv")
        with open(tmp_path / "t.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 100
        best = [float(r["best_so_far"]) for r in rows]
        assert all(a >= b for a, b in zip(best, best[1:]))
        assert all(float(r["min_cost"]) <= float(r["max_cost"]) for r in rows)
        late = rows[-20:]
        assert all(float(r["max_cost"]) > float(r["min_cost"]) for r in late)
