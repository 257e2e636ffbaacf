import csv

import pytest
from matplotlib.collections import PolyCollection
from matplotlib.lines import Line2D

from projplots import (
    EXPECTED_COLUMNS,
    FigureSpec,
    SchemaError,
    build_figure,
    plot_metric,
    read_results,
)


def golden_rows():
    """2 methods x 10 sample sizes."""
    rows = []
    sizes = [100 * (i + 1) for i in range(10)]
    for method, base in (("ours", 0.02), ("uniform", 0.4)):
        for i, size in enumerate(sizes):
            err = base / (i + 1)
            rows.append([method, size, 22, f"{err:.6g}", f"{err / 3:.6g}",
                         f"{0.5 + 0.01 * i:.6g}", "0.05"])
    return rows


def write_csv(path, rows, header=EXPECTED_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture
def golden_csv(tmp_path):
    p = tmp_path / "results.csv"
    write_csv(p, golden_rows())
    return p


def data_lines(ax):
    return [l for l in ax.get_lines() if len(l.get_xdata()) > 0]


class TestReadResults:
    def test_parses_methods(self, golden_csv):
        data = read_results(golden_csv)
        assert sorted(data) == ["ours", "uniform"]
        assert len(data["ours"]["sample_size"]) == 10

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        header = [c for c in EXPECTED_COLUMNS if c != "std_error"]
        write_csv(p, [], header=header)
        with pytest.raises(SchemaError, match="std_error"):
            read_results(p)

    def test_extra_column_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        write_csv(p, [], header=list(EXPECTED_COLUMNS) + ["bonus"])
        with pytest.raises(SchemaError, match="bonus"):
            read_results(p)

    def test_reordered_columns_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        header = list(EXPECTED_COLUMNS)
        header[0], header[1] = header[1], header[0]
        write_csv(p, [], header=header)
        with pytest.raises(SchemaError, match="order"):
            read_results(p)

    def test_bad_value_line_reported(self, tmp_path):
        p = tmp_path / "bad.csv"
        rows = golden_rows()
        rows[3][3] = "not-a-number"
        write_csv(p, rows)
        with pytest.raises(SchemaError, match="line 5"):
            read_results(p)


class TestBuildFigure:
    def test_two_lines_two_bands_ten_ticks(self, golden_csv, tmp_path):
        for metric in ("error", "time"):
            fig = build_figure(FigureSpec(str(golden_csv), metric,
                                          str(tmp_path / f"{metric}.png")))
            ax = fig.axes[0]
            lines = data_lines(ax)
            bands = [c for c in ax.collections if isinstance(c, PolyCollection)]
            assert len(lines) == 2, metric
            assert len(bands) == 2, metric
            assert len(ax.get_xticks()) == 10
            assert ax.get_legend() is not None

    def test_single_method_no_legend(self, tmp_path):
        p = tmp_path / "one.csv"
        write_csv(p, [r for r in golden_rows() if r[0] == "ours"])
        fig = build_figure(FigureSpec(str(p), "error", str(tmp_path / "o.png")))
        ax = fig.axes[0]
        assert len(data_lines(ax)) == 1
        assert ax.get_legend() is None

    def test_zero_std_degenerates_to_line(self, tmp_path):
        p = tmp_path / "z.csv"
        rows = [[m, s, 5, "0.1", "0", "1.0", "0"] for m in ("ours", "uniform")
                for s in (100, 200, 300)]
        write_csv(p, rows)
        fig = build_figure(FigureSpec(str(p), "error", str(tmp_path / "z.png")))
        assert len(data_lines(fig.axes[0])) == 2

    def test_log_toggle(self, golden_csv, tmp_path):
        fig = build_figure(FigureSpec(str(golden_csv), "error",
                                      str(tmp_path / "l.png"), log_y=True))
        assert fig.axes[0].get_yscale() == "log"


class TestPlotMetric:
    def test_writes_both_formats(self, golden_csv, tmp_path):
        for ext in ("png", "svg"):
            out = plot_metric(FigureSpec(str(golden_csv), "error",
                                         str(tmp_path / f"fig.{ext}")))
            assert out.exists() and out.stat().st_size > 0

    def test_deterministic_bytes(self, golden_csv, tmp_path):
        for ext in ("png", "svg"):
            a = plot_metric(FigureSpec(str(golden_csv), "time",
                                       str(tmp_path / f"a.{ext}")))
            b = plot_metric(FigureSpec(str(golden_csv), "time",
                                       str(tmp_path / f"b.{ext}")))
            assert a.read_bytes() == b.read_bytes(), ext

    def test_unsupported_format(self, golden_csv, tmp_path):
        with pytest.raises(ValueError, match="format"):
            plot_metric(FigureSpec(str(golden_csv), "error",
                                   str(tmp_path / "fig.pdf")))
