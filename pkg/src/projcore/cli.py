"""Command-line frontend.

Subcommands: coreset, regression-coreset, solve, experiment, verify, synth.
Exit codes: 0 success, 2 argument errors, 3 data errors, 4 construction
errors, 5 verification violation, 6 partial experiment failure.  Progress
goes to stderr; machine-readable output goes to stdout and files.  All
randomness flows from --seed; when absent a generated seed is printed so
the run can be reproduced after the fact.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import bench
from .errors import (
    ConstructionError,
    DataError,
    ParameterError,
    ProjcoreError,
)
from .geometry import PointSet
from .linf_coreset import (
    JkConfig,
    coreset_jk,
    guarantee_bound,
    verify_linf_ratio,
)
from .losses import LOSS_KINDS, LossSpec, RegressionInstance, regression_linf_coreset
from .sensitivity import assign_sensitivities, sample_l2_coreset
from .solver import SolveConfig, clustering_cost, em_projective, robust_regression_solve

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_DATA = 3
EXIT_CONSTRUCTION = 4
EXIT_VIOLATION = 5
EXIT_PARTIAL = 6


def _progress(msg: str):
    print(msg, file=sys.stderr)


def _resolve_seed(seed):
    if seed is not None:
        return int(seed)
    generated = secrets.randbelow(2**31)
    _progress(f"seed: {generated} (generated; pass --seed {generated} to reproduce)")
    return generated


def _resolve_workers(args) -> int:
    if getattr(args, "workers", None):
        return int(args.workers)
    env = os.environ.get("PROJCORE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"PROJCORE_WORKERS={env!r} is not an integer")
    return os.cpu_count() or 1


def _load_points(path, grid_delta=None) -> PointSet:
    try:
        with open(path, newline="") as fh:
            header = fh.readline().strip().split(",")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    P = bench.load_csv(path, header)
    pts = P.points
    if grid_delta is None and np.array_equal(pts, np.round(pts)) and pts.size:
        inferred = int(np.abs(pts).max())
        grid_delta = max(inferred, 1)
    if grid_delta is not None:
        try:
            return PointSet(pts, grid_delta=int(grid_delta))
        except ParameterError:
            pass  # not actually on the declared grid; fall through untagged
    return P


def _write_coreset_csv(path, indices, weights):
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "weight"])
        for i, w in zip(indices, weights):
            writer.writerow([int(i), f"{float(w):.12g}"])


def _read_coreset_csv(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["index", "weight"]:
                raise DataError(f"{path}: expected header 'index,weight'")
            idx, wts = [], []
            for row in reader:
                if not row:
                    continue
                idx.append(int(row[0]))
                wts.append(float(row[1]))
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e
    if not idx:
        raise DataError(f"{path}: empty coreset file")
    return np.asarray(idx), np.asarray(wts)


def _loss_from_args(args) -> LossSpec:
    kwargs = {"kind": args.loss}
    if getattr(args, "lam", None) is not None:
        kwargs["lam"] = args.lam
    if args.loss == "power":
        kwargs["z"] = getattr(args, "z", None) or 2.0
    return LossSpec(**kwargs)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_coreset(args) -> int:
    seed = _resolve_seed(args.seed)
    P = _load_points(args.input, args.grid_delta)
    if args.mode == "l2":
        if not 0 < args.epsilon < 1:
            raise ParameterError(f"--epsilon must lie in (0,1), got {args.epsilon}")
        if not 0 < args.delta < 1:
            raise ParameterError(f"--delta must lie in (0,1), got {args.delta}")
    t0 = time.perf_counter()
    config = JkConfig(c_exp=args.c_exp)
    if args.mode == "linf":
        core = coreset_jk(P, args.j, args.k, config)
        indices = core.indices
        weights = np.ones(len(indices))
    else:
        smap = assign_sensitivities(P, args.j, args.k, config)
        wc = sample_l2_coreset(P, smap, args.j, args.k, args.epsilon, args.delta,
                               c_sample=args.c_sample, rng_seed=seed)
        indices, weights = wc.indices, wc.u
    elapsed = time.perf_counter() - t0
    _write_coreset_csv(args.output, indices, weights)
    print(f"size={len(indices)} build_time_s={elapsed:.6f}")
    return EXIT_OK


def cmd_regression_coreset(args) -> int:
    _resolve_seed(args.seed)
    header = open(args.input).readline().strip().split(",")
    if args.label not in header:
        raise DataError(f"label column {args.label!r} not found in {args.input}")
    features = [c for c in header if c != args.label]
    inst = bench.load_csv(args.input, features, label_column=args.label)
    spec = _loss_from_args(args)
    t0 = time.perf_counter()
    core = regression_linf_coreset(inst, spec)
    elapsed = time.perf_counter() - t0
    _write_coreset_csv(args.output, core.indices, np.ones(len(core.indices)))
    print(f"size={len(core.indices)} build_time_s={elapsed:.6f} "
          f"guarantee_factor={core.guarantee_factor:.6g}")
    return EXIT_OK


def cmd_solve(args) -> int:
    seed = _resolve_seed(args.seed)
    cfg = SolveConfig(restarts=args.restarts, em_steps=args.steps, rng_seed=seed)
    out = {}
    if args.label is None:
        P = _load_points(args.input)
        weights = None
        if args.coreset:
            idx, wts = _read_coreset_csv(args.coreset)
            P = PointSet(P.points[idx])
            weights = wts
        loss = _loss_from_args(args) if args.loss else float(args.z)
        flats = em_projective(P, weights, args.j, args.k, loss, cfg)
        cost = clustering_cost(P, weights, flats, loss)
        out = {
            "problem": "projective",
            "cost": cost,
            "flats": [
                {"basis": f.basis.tolist(), "offset": f.offset.tolist()}
                for f in flats.flats
            ],
        }
    else:
        header = open(args.input).readline().strip().split(",")
        features = [c for c in header if c != args.label]
        inst = bench.load_csv(args.input, features, label_column=args.label)
        weights = None
        if args.coreset:
            idx, wts = _read_coreset_csv(args.coreset)
            inst = RegressionInstance(PointSet(inst.P.points[idx]), inst.b[idx])
            weights = wts
        if not args.loss:
            raise ParameterError("--loss is required for regression solves")
        sol = robust_regression_solve(inst, weights, _loss_from_args(args), cfg)
        out = {"problem": "regression", "cost": sol.objective, "w": sol.w.tolist()}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = _resolve_seed(args.seed)
    P = _load_points(args.input)
    idx, _ = _read_coreset_csv(args.coreset)
    if idx.min() < 0 or idx.max() >= P.n:
        raise DataError("coreset indices out of range for the input")
    ratio = verify_linf_ratio(P, idx, args.j, z=args.z,
                              num_queries=args.queries, rng_seed=seed)
    bound = guarantee_bound(args.j, args.z) if args.j >= 1 else float(np.sqrt(P.dim)) ** args.z
    print(f"max_ratio={ratio:.6g} bound={bound:.6g}")
    if ratio > bound:
        _progress("violation: observed ratio exceeds the declared bound")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as e:
        raise DataError(f"cannot open {args.config}: {e}") from e
    except json.JSONDecodeError as e:
        raise ParameterError(f"config is not valid JSON: {e}") from e
    spec = bench.ExperimentSpec.from_dict(cfg)
    if args.output:
        spec = bench.ExperimentSpec(
            dataset=spec.dataset, problem=spec.problem,
            sample_sizes=spec.sample_sizes, trials=spec.trials,
            methods=spec.methods, base_seed=spec.base_seed,
            output=args.output, workers=_resolve_workers(args),
            c_exp=spec.c_exp,
        )
    result = bench.run_experiment(spec)
    if spec.output:
        csv_path = Path(spec.output).with_suffix(".csv")
        _progress(f"wrote {csv_path} and {csv_path.with_suffix('.json')}")
    for row in result.rows:
        print(f"{row.method},{row.sample_size},mean_error={row.mean_error:.6g}")
    if not result.ok:
        for f in result.failures:
            _progress(f"cell failure: {f}")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_synth(args) -> int:
    seed = _resolve_seed(args.seed)
    P = bench.synthetic_dataset(seed=seed, n_total=args.n, n_outliers=args.outliers)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for row in P.points:
            writer.writerow([int(row[0]), int(row[1])])
    print(f"n={P.n} output={out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="projcore",
        description="Coresets for projective clustering and M-estimator regression",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coreset", help="build an L-infinity or L2 coreset")
    c.add_argument("--input", required=True)
    c.add_argument("--j", type=int, required=True)
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--mode", choices=("linf", "l2"), default="linf")
    c.add_argument("--epsilon", type=float, default=0.5)
    c.add_argument("--delta", type=float, default=0.1)
    c.add_argument("--c-sample", dest="c_sample", type=float, default=1.0)
    c.add_argument("--c-exp", dest="c_exp", type=float, default=2.0)
    c.add_argument("--grid-delta", dest="grid_delta", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--output", required=True)
    c.set_defaults(func=cmd_coreset)

    r = sub.add_parser("regression-coreset", help="L-infinity coreset for M-estimator regression")
    r.add_argument("--input", required=True)
    r.add_argument("--label", required=True)
    r.add_argument("--loss", choices=LOSS_KINDS, required=True)
    r.add_argument("--lambda", dest="lam", type=float)
    r.add_argument("--z", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--output", required=True)
    r.set_defaults(func=cmd_regression_coreset)

    s = sub.add_parser("solve", help="solve clustering or regression, optionally on a coreset")
    s.add_argument("--input", required=True)
    s.add_argument("--coreset")
    s.add_argument("--j", type=int, default=0)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--z", type=float, default=2.0)
    s.add_argument("--loss", choices=LOSS_KINDS)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--label")
    s.add_argument("--restarts", type=int, default=8)
    s.add_argument("--steps", type=int, default=6)
    s.add_argument("--seed", type=int)
    s.add_argument("--output")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="randomized check of the L-infinity guarantee")
    v.add_argument("--input", required=True)
    v.add_argument("--coreset", required=True)
    v.add_argument("--j", type=int, required=True)
    v.add_argument("--z", type=float, default=1.0)
    v.add_argument("--queries", type=int, default=1000)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("experiment", help="run a coreset-vs-uniform sweep from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--output")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_experiment)

    y = sub.add_parser("synth", help="write the synthetic line-plus-outliers dataset")
    y.add_argument("--seed", type=int)
    y.add_argument("--n", type=int, default=20_000)
    y.add_argument("--outliers", type=int, default=10)
    y.add_argument("--output", required=True)
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as e:
        _progress(f"argument error: {e}")
        return EXIT_ARGUMENT
    except DataError as e:
        _progress(f"data error: {e}")
        return EXIT_DATA
    except ConstructionError as e:
        _progress(f"construction error: {e}")
        return EXIT_CONSTRUCTION
    except ProjcoreError as e:
        _progress(f"error: {e}")
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
