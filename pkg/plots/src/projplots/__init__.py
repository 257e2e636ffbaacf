"""Paper-style figures from benchmark result CSVs.

Consumes the frozen schema written by the benchmark harness
(method, sample_size, trial_count, mean_error, std_error, mean_time_s,
std_time_s) and renders one mean line per method with a shaded one-standard-
deviation band.  Statistics are plotted as-is, never recomputed.
"""

from .figures import (
    EXPECTED_COLUMNS,
    METRICS,
    FigureSpec,
    SchemaError,
    build_figure,
    plot_metric,
    read_results,
)

__all__ = [
    "EXPECTED_COLUMNS",
    "METRICS",
    "FigureSpec",
    "SchemaError",
    "build_figure",
    "plot_metric",
    "read_results",
]
