"""Datasets, experiment orchestration, and result serialization.

Runs the coreset-vs-uniform-sampling protocol: for every (trial, sample
size, method) cell, build the compressed set, solve on it, and score the
solution on the full data against a cached reference optimum.  Results are
aggregated to mean/std per (method, size) and written as a CSV with a
frozen column set plus a JSON sidecar echoing the configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ColumnError, DataError, ParameterError
from .geometry import PointSet
from .linf_coreset import JkConfig
from .losses import LossSpec, RegressionInstance, regression_objective
from .sensitivity import (
    SensitivityMap,
    WeightedCoreset,
    assign_sensitivities,
    sample_with_sensitivity,
)
from .solver import (
    FlatSet,
    SolveConfig,
    approximation_error,
    clustering_cost,
    em_projective,
    robust_regression_solve,
)

__all__ = [
    "RESULT_COLUMNS",
    "ExperimentSpec",
    "ExperimentResult",
    "ProblemSpec",
    "synthetic_dataset",
    "two_center_dataset",
    "load_csv",
    "uniform_baseline",
    "run_experiment",
    "write_results",
]

RESULT_COLUMNS = (
    "method",
    "sample_size",
    "trial_count",
    "mean_error",
    "std_error",
    "mean_time_s",
    "std_time_s",
)

METHODS = ("ours", "uniform")


def synthetic_dataset(seed: int = 0, n_total: int = 20_000, n_outliers: int = 10,
                      x_range: Tuple[int, int] = (0, 1000),
                      y_outlier_range: Tuple[int, int] = (100, 1000)) -> PointSet:
    """The planar line-plus-outliers set: all but ``n_outliers`` points sit
    on the x-axis, the rest are pushed away from it.  Integer grid."""
    rng = np.random.default_rng(seed)
    n_line = n_total - n_outliers
    xs = rng.integers(x_range[0], x_range[1] + 1, size=n_total)
    ys = np.zeros(n_total, dtype=np.int64)
    ys[n_line:] = rng.integers(y_outlier_range[0], y_outlier_range[1] + 1, size=n_outliers)
    pts = np.stack([xs, ys], axis=1)
    delta = int(max(abs(x_range[0]), abs(x_range[1]), y_outlier_range[1]))
    return PointSet(pts, grid_delta=delta)


def two_center_dataset(n: int = 2000, far: int = 1_000_000) -> PointSet:
    """n-1 points at the origin and a single point far out on the x-axis;
    the construction on which uniform sampling provably fails for k=2."""
    pts = np.zeros((n, 2), dtype=np.int64)
    pts[-1, 0] = far
    return PointSet(pts, grid_delta=far)


def load_csv(path, feature_columns: Sequence[str],
             label_column: Optional[str] = None):
    """Numeric CSV with a header row.  Returns a PointSet, or a
    RegressionInstance when a label column is named.  Rows with non-numeric
    entries are rejected with their row numbers."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        wanted = list(feature_columns) + ([label_column] if label_column else [])
        for col in wanted:
            if col not in header:
                raise ColumnError(col)
        take = [header.index(c) for c in wanted]
        rows: List[List[float]] = []
        bad: List[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(row[i]) for i in take])
            except (ValueError, IndexError):
                bad.append(lineno)
        if bad:
            shown = ", ".join(map(str, bad[:10]))
            more = "" if len(bad) <= 10 else f" (+{len(bad) - 10} more)"
            raise DataError(f"{path}: non-numeric or short rows at lines {shown}{more}")
        if not rows:
            raise DataError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    if label_column is None:
        return PointSet(data)
    return RegressionInstance(PointSet(data[:, :-1]), data[:, -1])


def uniform_baseline(P: PointSet, m: int, rng_seed: int = 0) -> WeightedCoreset:
    """m uniform draws without replacement, each carrying weight n/m."""
    if not 1 <= m <= P.n:
        raise ParameterError(f"m must lie in [1, {P.n}], got {m}")
    rng = np.random.default_rng(rng_seed)
    idx = rng.choice(P.n, size=m, replace=False)
    return WeightedCoreset(idx, np.full(m, P.n / m))


# ---------------------------------------------------------------------------
# experiment specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """Either projective clustering (j, k, and a loss or plain exponent) or
    regression (loss only)."""

    kind: str
    j: int = 0
    k: int = 1
    z: Optional[float] = 2.0
    loss: Optional[LossSpec] = None
    restarts: int = 8
    em_steps: int = 6

    def __post_init__(self):
        if self.kind not in ("projective", "regression"):
            raise ParameterError("problem.kind must be 'projective' or 'regression'")
        if self.kind == "regression" and self.loss is None:
            raise ParameterError("problem.loss is required for regression")

    @property
    def cost_fn(self):
        return self.loss if self.loss is not None else float(self.z)

    def key(self) -> str:
        loss_key = self.loss.kind if self.loss else f"z{self.z}"
        lam = self.loss.lam if self.loss else ""
        return f"{self.kind}:j{self.j}:k{self.k}:{loss_key}:{lam}"


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: Union[str, dict]
    problem: ProblemSpec
    sample_sizes: tuple
    trials: int = 22
    methods: tuple = METHODS
    base_seed: int = 0
    output: Optional[str] = None
    workers: int = 1
    c_exp: float = 2.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sample_sizes)
        if not sizes or any(s <= 0 for s in sizes):
            raise ParameterError("sample_sizes must be positive")
        if list(sizes) != sorted(sizes):
            raise ParameterError("sample_sizes must be ascending")
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        methods = tuple(self.methods)
        bad = [m for m in methods if m not in METHODS]
        if bad or not methods:
            raise ParameterError(f"methods must be a nonempty subset of {METHODS}")
        object.__setattr__(self, "sample_sizes", sizes)
        object.__setattr__(self, "methods", methods)

    @staticmethod
    def from_dict(cfg: dict) -> "ExperimentSpec":
        """Build from a parsed config file, naming the offending field path
        on validation failure."""

        def need(key, path=""):
            if key not in cfg:
                raise ParameterError(f"config field missing: {path or key}")
            return cfg[key]

        prob_raw = need("problem")
        if not isinstance(prob_raw, dict) or "kind" not in prob_raw:
            raise ParameterError("config field missing: problem.kind")
        loss = None
        if "loss" in prob_raw and prob_raw["loss"] is not None:
            loss_raw = prob_raw["loss"]
            if not isinstance(loss_raw, dict) or "kind" not in loss_raw:
                raise ParameterError("config field missing: problem.loss.kind")
            kwargs = {"kind": loss_raw["kind"]}
            if "lambda" in loss_raw:
                kwargs["lam"] = float(loss_raw["lambda"])
            if "z" in loss_raw:
                kwargs["z"] = float(loss_raw["z"])
            try:
                loss = LossSpec(**kwargs)
            except ParameterError as e:
                raise ParameterError(f"problem.loss: {e}") from e
        try:
            problem = ProblemSpec(
                kind=prob_raw["kind"],
                j=int(prob_raw.get("j", 0)),
                k=int(prob_raw.get("k", 1)),
                z=float(prob_raw.get("z", 2.0)),
                loss=loss,
                restarts=int(prob_raw.get("restarts", 8)),
                em_steps=int(prob_raw.get("em_steps", 6)),
            )
        except ParameterError as e:
            raise ParameterError(f"problem: {e}") from e
        try:
            return ExperimentSpec(
                dataset=need("dataset"),
                problem=problem,
                sample_sizes=tuple(need("sample_sizes")),
                trials=int(cfg.get("trials", 22)),
                methods=tuple(cfg.get("methods", METHODS)),
                base_seed=int(cfg.get("base_seed", 0)),
                output=cfg.get("output"),
                workers=int(cfg.get("workers", 1)),
                c_exp=float(cfg.get("c_exp", 2.0)),
            )
        except ParameterError as e:
            msg = str(e)
            raise ParameterError(msg if ":" in msg else f"config: {msg}") from e


@dataclass(frozen=True)
class ResultRow:
    method: str
    sample_size: int
    trial_count: int
    mean_error: float
    std_error: float
    mean_time_s: float
    std_time_s: float


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple
    metadata: dict
    failures: tuple = ()

    @property
    def ok(self) -> bool:
        return len(self.failures) == 0


def _load_dataset(dataset):
    if isinstance(dataset, dict):
        kind = dataset.get("kind")
        if kind == "synthetic":
            return synthetic_dataset(
                seed=int(dataset.get("seed", 0)),
                n_total=int(dataset.get("n_total", 20_000)),
                n_outliers=int(dataset.get("n_outliers", 10)),
            )
        if kind == "two-center":
            return two_center_dataset(int(dataset.get("n", 2000)),
                                      int(dataset.get("far", 1_000_000)))
        if kind == "csv":
            return load_csv(dataset["path"], dataset["feature_columns"],
                            dataset.get("label_column"))
        raise ParameterError(f"dataset.kind {kind!r} not recognized")
    if dataset == "synthetic":
        return synthetic_dataset()
    if dataset == "two-center":
        return two_center_dataset()
    raise ParameterError(
        "dataset must be 'synthetic', 'two-center', or a mapping with kind "
        "synthetic/two-center/csv"
    )


def _dataset_hash(data) -> str:
    if isinstance(data, RegressionInstance):
        h = hashlib.sha256(np.ascontiguousarray(data.P.points).tobytes())
        h.update(np.ascontiguousarray(data.b).tobytes())
    else:
        h = hashlib.sha256(np.ascontiguousarray(data.points).tobytes())
    return h.hexdigest()


def _cell_seed(base: int, trial: int, size: int, method: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([base, trial, size, METHODS.index(method)])


def _solve_clustering(P: PointSet, weights, problem: ProblemSpec, seed: int,
                      budget_factor: int = 1) -> FlatSet:
    cfg = SolveConfig(restarts=problem.restarts * budget_factor,
                      em_steps=problem.em_steps, rng_seed=seed)
    return em_projective(P, weights, problem.j, problem.k, problem.cost_fn, cfg)


def _solve_regression(inst: RegressionInstance, weights, problem: ProblemSpec,
                      seed: int, budget_factor: int = 1):
    cfg = SolveConfig(restarts=problem.restarts * budget_factor, rng_seed=seed)
    return robust_regression_solve(inst, weights, problem.loss, cfg).w


_REFERENCE_CACHE: Dict[Tuple[str, str], float] = {}


def _reference_cost(data, problem: ProblemSpec, dataset_hash: str) -> float:
    key = (dataset_hash, problem.key())
    if key not in _REFERENCE_CACHE:
        if problem.kind == "projective":
            F = _solve_clustering(data, None, problem, seed=0, budget_factor=10)
            _REFERENCE_CACHE[key] = clustering_cost(data, None, F, problem.cost_fn)
        else:
            w = _solve_regression(data, None, problem, seed=0, budget_factor=10)
            _REFERENCE_CACHE[key] = regression_objective(data, problem.loss, w)
    return _REFERENCE_CACHE[key]


def _run_cell(data, problem: ProblemSpec, method: str, size: int,
              smap: Optional[SensitivityMap], reference: float,
              seed_seq: np.random.SeedSequence) -> Tuple[float, float]:
    """Build + solve + score one cell; returns (error, elapsed seconds)."""
    seeds = seed_seq.generate_state(2)
    is_regression = isinstance(data, RegressionInstance)
    P = data.P if is_regression else data
    t0 = time.perf_counter()
    if method == "uniform":
        core = uniform_baseline(P, min(size, P.n), rng_seed=int(seeds[0]))
    else:
        core = sample_with_sensitivity(P, smap, size, rng_seed=int(seeds[0]))
    if is_regression:
        sub = RegressionInstance(PointSet(P.points[core.indices]), data.b[core.indices])
        sol = _solve_regression(sub, core.u, problem, seed=int(seeds[1]))
    else:
        sub = PointSet(P.points[core.indices])
        sol = _solve_clustering(sub, core.u, problem, seed=int(seeds[1]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        err = approximation_error(data, sol, reference, problem.cost_fn
                                  if not is_regression else problem.loss)
    elapsed = time.perf_counter() - t0
    return float(err), float(elapsed)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Execute the full sweep and aggregate mean/std per (method, size).

    The sensitivity map is computed once per dataset; every cell derives
    its own seed from (base_seed, trial, size, method) so reruns reproduce
    every number bit-for-bit regardless of worker count.  Cell failures are
    recorded and the run continues.
    """
    data = _load_dataset(spec.dataset)
    ds_hash = _dataset_hash(data)
    problem = spec.problem
    is_regression = isinstance(data, RegressionInstance)
    if is_regression and problem.kind != "regression":
        raise ParameterError("labelled dataset requires a regression problem")
    if not is_regression and problem.kind != "projective":
        raise ParameterError("unlabelled dataset requires a projective problem")

    reference = _reference_cost(data, problem, ds_hash)

    smap = None
    smap_time = 0.0
    if "ours" in spec.methods:
        t0 = time.perf_counter()
        jk_config = JkConfig(c_exp=spec.c_exp, enumerate_anchors=True)
        if is_regression:
            lifted = PointSet(np.hstack([data.P.points, data.b[:, None]]))
            smap = assign_sensitivities(lifted, data.dim, 1, jk_config)
        else:
            smap = assign_sensitivities(data, problem.j, problem.k, jk_config)
        smap_time = time.perf_counter() - t0

    cells = [(t, s, m) for m in spec.methods for s in spec.sample_sizes
             for t in range(spec.trials)]

    def work(cell):
        trial, size, method = cell
        try:
            err, dt = _run_cell(data, problem, method, size, smap, reference,
                                _cell_seed(spec.base_seed, trial, size, method))
            return cell, (err, dt), None
        except Exception as e:  # noqa: BLE001 - cell isolation is the contract
            return cell, None, f"{type(e).__name__}: {e}"

    outcomes = {}
    failures: List[str] = []
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]
    for cell, value, err in results:
        if err is None:
            outcomes[cell] = value
        else:
            trial, size, method = cell
            failures.append(f"trial={trial} size={size} method={method}: {err}")

    rows = []
    for method in spec.methods:
        for size in spec.sample_sizes:
            vals = [outcomes[(t, size, method)]
                    for t in range(spec.trials) if (t, size, method) in outcomes]
            errs = np.array([v[0] for v in vals])
            times = np.array([v[1] for v in vals])
            ddof = 1 if len(vals) > 1 else 0
            rows.append(ResultRow(
                method=method,
                sample_size=size,
                trial_count=len(vals),
                mean_error=float(errs.mean()) if len(vals) else float("nan"),
                std_error=float(errs.std(ddof=ddof)) if len(vals) else float("nan"),
                mean_time_s=float(times.mean()) if len(vals) else float("nan"),
                std_time_s=float(times.std(ddof=ddof)) if len(vals) else float("nan"),
            ))

    metadata = {
        "dataset_hash": ds_hash,
        "reference_cost": reference,
        "sensitivity_time_s": smap_time,
        "config": {
            "dataset": spec.dataset,
            "problem": {
                "kind": problem.kind, "j": problem.j, "k": problem.k,
                "z": problem.z,
                "loss": None if problem.loss is None else
                    {"kind": problem.loss.kind, "lambda": problem.loss.lam,
                     "z": problem.loss.z},
                "restarts": problem.restarts, "em_steps": problem.em_steps,
            },
            "sample_sizes": list(spec.sample_sizes),
            "trials": spec.trials,
            "methods": list(spec.methods),
            "base_seed": spec.base_seed,
            "c_exp": spec.c_exp,
        },
    }
    result = ExperimentResult(tuple(rows), metadata, tuple(failures))
    if spec.output:
        write_results(result, spec.output)
    return result


def write_results(result: ExperimentResult, output_prefix) -> Tuple[Path, Path]:
    """Write <prefix>.csv in the frozen column order and <prefix>.json with
    the config echo and dataset hash."""
    prefix = Path(output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in result.rows:
            writer.writerow([
                r.method, r.sample_size, r.trial_count,
                f"{r.mean_error:.12g}", f"{r.std_error:.12g}",
                f"{r.mean_time_s:.12g}", f"{r.std_time_s:.12g}",
            ])
    sidecar = dict(result.metadata)
    sidecar["failures"] = list(result.failures)
    with json_path.open("w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
