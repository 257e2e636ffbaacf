from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

EXPECTED_COLUMNS = (
    "method",
    "sample_size",
    "trial_count",
    "mean_error",
    "std_error",
    "mean_time_s",
    "std_time_s",
)

METRICS = {
    "error": ("mean_error", "std_error", "approximation error"),
    "time": ("mean_time_s", "std_time_s", "build+solve time (s)"),
}

_COLORS = {"ours": "#1b7837", "uniform": "#762a83"}
_FALLBACK_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


class SchemaError(ValueError):
    """The input CSV does not match the frozen results schema."""


@dataclass(frozen=True)
class FigureSpec:
    input_csv: str
    metric: str
    output: str
    title: str = ""
    log_y: bool = False

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {sorted(METRICS)}, got {self.metric!r}")


@dataclass(frozen=True)
class MethodSeries:
    method: str
    sample_sizes: List[int]
    mean: List[float]
    std: List[float]


def read_results(path) -> Dict[str, Dict[str, List[float]]]:
    """Parse the frozen-schema CSV into per-method column lists, failing
    loudly (naming the column) on any schema drift."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in EXPECTED_COLUMNS:
            if col not in header:
                raise SchemaError(f"{path}: missing column {col!r}")
        extra = [h for h in header if h not in EXPECTED_COLUMNS]
        if extra:
            raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
        if tuple(header) != EXPECTED_COLUMNS:
            raise SchemaError(f"{path}: column order differs from the frozen schema")
        idx = {c: header.index(c) for c in EXPECTED_COLUMNS}
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append({
                    "method": row[idx["method"]],
                    "sample_size": int(row[idx["sample_size"]]),
                    "mean_error": float(row[idx["mean_error"]]),
                    "std_error": float(row[idx["std_error"]]),
                    "mean_time_s": float(row[idx["mean_time_s"]]),
                    "std_time_s": float(row[idx["std_time_s"]]),
                })
            except (ValueError, IndexError) as e:
                raise SchemaError(f"{path}: bad row at line {lineno}: {e}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    out: Dict[str, Dict[str, List[float]]] = {}
    for r in rows:
        bucket = out.setdefault(r["method"], {
            "sample_size": [], "mean_error": [], "std_error": [],
            "mean_time_s": [], "std_time_s": [],
        })
        for key in bucket:
            bucket[key].append(r[key])
    return out


def _series(data, metric: str) -> List[MethodSeries]:
    mean_col, std_col, _ = METRICS[metric]
    series = []
    for method in sorted(data):
        cols = data[method]
        order = sorted(range(len(cols["sample_size"])), key=lambda i: cols["sample_size"][i])
        series.append(MethodSeries(
            method=method,
            sample_sizes=[int(cols["sample_size"][i]) for i in order],
            mean=[cols[mean_col][i] for i in order],
            std=[cols[std_col][i] for i in order],
        ))
    return series


def build_figure(spec: FigureSpec):
    """Figure with one mean line per method and a shaded +-1 std band."""
    data = read_results(spec.input_csv)
    mean_col, _, ylabel = METRICS[spec.metric]
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for i, s in enumerate(_series(data, spec.metric)):
        color = _COLORS.get(s.method, _FALLBACK_COLORS[i % len(_FALLBACK_COLORS)])
        lo = [m - sd for m, sd in zip(s.mean, s.std)]
        hi = [m + sd for m, sd in zip(s.mean, s.std)]
        ax.fill_between(s.sample_sizes, lo, hi, color=color, alpha=0.2, linewidth=0)
        ax.plot(s.sample_sizes, s.mean, color=color, marker="o", markersize=3.5,
                label=s.method)
    ax.set_xlabel("sample size")
    ax.set_ylabel(ylabel)
    if spec.title:
        ax.set_title(spec.title)
    if spec.log_y:
        ax.set_yscale("log")
    sizes = sorted({sz for s in _series(data, spec.metric) for sz in s.sample_sizes})
    ax.set_xticks(sizes)
    if len(data) > 1:
        ax.legend()
    fig.tight_layout()
    return fig


def plot_metric(spec: FigureSpec) -> Path:
    """Render the figure and write it; output bytes carry no timestamps so
    identical input yields identical files."""
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    suffix = out.suffix.lower()
    if suffix == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": "projcore-plots"}):
            fig.savefig(out, format="svg", metadata={"Date": None})
    elif suffix == ".png":
        fig.savefig(out, format="png", metadata={"Software": None})
    else:
        raise ValueError(f"unsupported output format {suffix!r} (use .png or .svg)")
    plt.close(fig)
    return out
