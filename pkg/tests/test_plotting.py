import csv

from conftest import data_interface, regression_spec
from mockcheck.model_checks import run_model_stage
from mockcheck.plotting import write_figures, write_traces_csv
from mockcheck.report import Report


def test_traces_csv_long_format(tmp_path):
    report = run_model_stage(regression_spec(), data_interface(7, "regression"))
    path = write_traces_csv(report, tmp_path / "t.csv")
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 3 * 60
    assert rows[0]["check"] == "training_dynamics" and rows[0]["epoch"] == "1"
    assert float(rows[59]["loss"]) == report.traces[0]["losses"][59]


def test_figures_handle_non_finite(tmp_path):
    rec = {"check": "learnability", "run": 0, "seed": 1, "metric_kind": "mae",
           "losses": [1.0, "inf", "nan"], "metrics": [0.5, "nan", "nan"]}
    report = Report("data", {}, {}, [], [], traces=[rec])
    paths = write_figures(report, tmp_path / "out")
    assert [p.name for p in paths] == ["traces.csv", "data_learnability_run0.png"]
    assert paths[1].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_no_traces_only_csv(tmp_path):
    paths = write_figures(Report("model", {}, {}, [], []), tmp_path)
    assert [p.name for p in paths] == ["traces.csv"]
