import csv
import json

import numpy as np
import pytest

from projcore.bench import (
    RESULT_COLUMNS,
    ExperimentSpec,
    ProblemSpec,
    load_csv,
    run_experiment,
    synthetic_dataset,
    two_center_dataset,
    uniform_baseline,
    write_results,
)
from projcore.errors import ColumnError, DataError, ParameterError
from projcore.geometry import PointSet
from projcore.losses import RegressionInstance


class TestSyntheticDataset:
    def test_counts(self):
        P = synthetic_dataset(seed=3)
        assert P.n == 20_000
        on_axis = np.sum(P.points[:, 1] == 0)
        assert on_axis == 19_990
        assert np.sum(np.abs(P.points[:, 1]) > 0) == 10

    def test_determinism(self):
        a = synthetic_dataset(seed=7)
        b = synthetic_dataset(seed=7)
        assert np.array_equal(a.points, b.points)

    def test_grid_tagged(self):
        P = synthetic_dataset(seed=1)
        assert P.grid_delta == 1000

    def test_two_center(self):
        P = two_center_dataset(n=100, far=500)
        assert P.n == 100
        assert np.sum(np.abs(P.points).sum(axis=1) > 0) == 1
        assert P.points[-1, 0] == 500


class TestLoadCsv:
    def test_small_roundtrip(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("a,b,c\n1,2,9\n3,4,9\n5,6,9\n")
        P = load_csv(f, ["a", "b"])
        assert isinstance(P, PointSet)
        assert np.allclose(P.points, [[1, 2], [3, 4], [5, 6]])

    def test_label_column(self, tmp_path):
        f = tmp_path / "reg.csv"
        f.write_text("x,y,target\n1,0,5\n0,1,6\n")
        inst = load_csv(f, ["x", "y"], label_column="target")
        assert isinstance(inst, RegressionInstance)
        assert np.allclose(inst.b, [5, 6])

    def test_missing_column_named(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(ColumnError) as e:
            load_csv(f, ["a", "zz"])
        assert "zz" in str(e.value)

    def test_bad_rows_reported_with_line_numbers(self, tmp_path):
        f = tmp_path / "pts.csv"
        f.write_text("a,b\n1,2\nx,4\n5,6\n")
        with pytest.raises(DataError) as e:
            load_csv(f, ["a", "b"])
        assert "3" in str(e.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv", ["a"])


class TestUniformBaseline:
    def test_full_sample_weights_one(self):
        P = PointSet(np.arange(12, dtype=float).reshape(6, 2))
        c = uniform_baseline(P, 6, rng_seed=0)
        assert sorted(c.indices) == list(range(6))
        assert np.allclose(c.u, 1.0)

    def test_weight_sum_is_n(self):
        P = PointSet(np.arange(40, dtype=float)[:, None])
        for m in (1, 7, 40):
            c = uniform_baseline(P, m, rng_seed=2)
            assert float(c.u.sum()) == pytest.approx(P.n)

    def test_determinism_and_bounds(self):
        P = PointSet(np.arange(20, dtype=float)[:, None])
        a = uniform_baseline(P, 5, rng_seed=9)
        b = uniform_baseline(P, 5, rng_seed=9)
        assert np.array_equal(a.indices, b.indices)
        with pytest.raises(ParameterError):
            uniform_baseline(P, 21)


def small_spec(tmp_path=None, **overrides):
    base = dict(
        dataset={"kind": "two-center", "n": 200, "far": 1000},
        problem=ProblemSpec(kind="projective", j=0, k=2, z=2.0, restarts=4, em_steps=4),
        sample_sizes=(20,),
        trials=2,
        methods=("uniform",),
        base_seed=5,
    )
    base.update(overrides)
    return ExperimentSpec(**base)


class TestRunExperiment:
    def test_minimal_single_row(self):
        res = run_experiment(small_spec())
        assert len(res.rows) == 1
        row = res.rows[0]
        assert row.method == "uniform"
        assert row.trial_count == 2
        assert row.mean_time_s > 0

    def test_row_shape(self):
        res = run_experiment(small_spec(methods=("ours", "uniform"), sample_sizes=(10, 20)))
        assert len(res.rows) == 4

    def test_deterministic_errors(self):
        spec = small_spec(methods=("ours", "uniform"))
        r1 = run_experiment(spec)
        r2 = run_experiment(spec)
        for a, b in zip(r1.rows, r2.rows):
            assert a.mean_error == b.mean_error
            assert a.std_error == b.std_error

    def test_workers_do_not_change_results(self):
        spec1 = small_spec(methods=("ours", "uniform"))
        spec2 = small_spec(methods=("ours", "uniform"), workers=4)
        r1 = run_experiment(spec1)
        r2 = run_experiment(spec2)
        for a, b in zip(r1.rows, r2.rows):
            assert a.mean_error == b.mean_error

    def test_two_center_direction(self):
        spec = small_spec(methods=("ours", "uniform"), sample_sizes=(20,), trials=6)
        res = run_experiment(spec)
        by_method = {r.method: r for r in res.rows}
        assert by_method["ours"].mean_error < by_method["uniform"].mean_error

    def test_output_files(self, tmp_path):
        spec = small_spec(output=str(tmp_path / "out"))
        res = run_experiment(spec)
        csv_path = tmp_path / "out.csv"
        json_path = tmp_path / "out.json"
        assert csv_path.exists() and json_path.exists()
        with csv_path.open() as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == RESULT_COLUMNS
        assert len(rows) == 2
        meta = json.loads(json_path.read_text())
        assert "dataset_hash" in meta and "config" in meta

    def test_mismatched_problem_kind(self):
        with pytest.raises(ParameterError):
            run_experiment(small_spec(problem=ProblemSpec(kind="regression",
                                                          loss=None)))


class TestSpecFromDict:
    def test_valid(self):
        cfg = {
            "dataset": "two-center",
            "problem": {"kind": "projective", "j": 0, "k": 2, "z": 2},
            "sample_sizes": [10, 20],
            "trials": 3,
            "methods": ["uniform"],
            "base_seed": 1,
        }
        spec = ExperimentSpec.from_dict(cfg)
        assert spec.problem.k == 2
        assert spec.sample_sizes == (10, 20)

    def test_missing_field_paths(self):
        with pytest.raises(ParameterError, match="problem"):
            ExperimentSpec.from_dict({"dataset": "synthetic", "sample_sizes": [5]})
        with pytest.raises(ParameterError, match="sample_sizes"):
            ExperimentSpec.from_dict({"dataset": "synthetic",
                                      "problem": {"kind": "projective"}})
        with pytest.raises(ParameterError, match="problem.loss.kind"):
            ExperimentSpec.from_dict({
                "dataset": "synthetic",
                "problem": {"kind": "regression", "loss": {"lambda": 2}},
                "sample_sizes": [5],
            })

    def test_regression_loss_parsed(self):
        cfg = {
            "dataset": {"kind": "two-center", "n": 50, "far": 100},
            "problem": {"kind": "regression", "loss": {"kind": "huber", "lambda": 2.5}},
            "sample_sizes": [10],
        }
        spec = ExperimentSpec.from_dict(cfg)
        assert spec.problem.loss.kind == "huber"
        assert spec.problem.loss.lam == 2.5
