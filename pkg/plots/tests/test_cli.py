import csv

from projplots import EXPECTED_COLUMNS
from projplots.cli import main


def write_golden(path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EXPECTED_COLUMNS)
        for method in ("ours", "uniform"):
            for i in range(10):
                w.writerow([method, 100 * (i + 1), 22, 0.1 / (i + 1), 0.01,
                            0.5, 0.05])


def test_cli_renders(tmp_path, capsys):
    src = tmp_path / "results.csv"
    write_golden(src)
    out = tmp_path / "err.png"
    rc = main(["--input", str(src), "--metric", "error", "--output", str(out),
               "--title", "error vs sample size", "--log-y"])
    assert rc == 0
    assert out.exists()
    assert str(out) in capsys.readouterr().out


def test_cli_schema_drift_fails_loudly(tmp_path, capsys):
    src = tmp_path / "bad.csv"
    with open(src, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "sample_size"])  # truncated schema
        w.writerow(["ours", 100])
    rc = main(["--input", str(src), "--metric", "error",
               "--output", str(tmp_path / "x.png")])
    assert rc == 1
    assert "missing column" in capsys.readouterr().err
