"""Acceptance suite: one test per criterion, each reported as a PASS/FAIL
line in the pytest terminal summary (and on stdout when run with -s)."""

import json
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import (
    ACCEPTANCE_RESULTS,
    binary_spec,
    data_interface,
    dense,
    max_relative_error,
    mean_impute,
    model_interface,
    multiclass_spec,
    random_gradient_case,
    regression_spec,
    truck_dataset,
)
from mockcheck.cli import main
from mockcheck.data_checks import DataStageConfig, run_data_stage
from mockcheck.engine import finite_diff_gradients, gradients
from mockcheck.findings import Finding
from mockcheck.mocks import MockDataConfig, generate_mock_data, mock_model_recipe, mock_model_spec
from mockcheck.model_checks import STRUCTURAL_CHECKS, ModelStageConfig, run_model_stage
from mockcheck import model_checks
from mockcheck.pipeline import Dataset, load_dataset
from mockcheck.report import run_repeated

SEEDS = (1, 42, 1337)


@contextmanager
def criterion(number, text):
    key = f"criterion {number}"
    try:
        yield
    except BaseException:
        ACCEPTANCE_RESULTS[key] = (False, text)
        print(f"FAIL  {key}: {text}")
        raise
    ACCEPTANCE_RESULTS[key] = (True, text)
    print(f"PASS  {key}: {text}")


# -- 1 ---------------------------------------------------------------------

TABLE = [
    # (arch, task, classes) -> (output units, activation, loss, metric)
    (("FCNN", "regression", 1), (1, "linear", "mse", "mae")),
    (("CNN", "regression", 1), (1, "linear", "mse", "mae")),
    (("FCNN", "binary_classification", 2), (2, "sigmoid", "binary_crossentropy", "accuracy")),
    (("CNN", "binary_classification", 2), (2, "sigmoid", "binary_crossentropy", "accuracy")),
    (("FCNN", "multiclass_classification", 5), (5, "softmax", "categorical_crossentropy", "accuracy")),
    (("CNN", "multiclass_classification", 5), (5, "softmax", "categorical_crossentropy", "accuracy")),
]


def test_criterion_1_decision_table():
    with criterion(1, "decision table: 6 columns reproduced exactly, < 1 s"):
        start = time.perf_counter()
        for features in (3, 7, 12):
            for (arch, task, classes), (units, act, loss, metric) in TABLE:
                r = mock_model_recipe(model_interface(arch, task), features, classes)
                assert (r.hidden_units, r.output_units, r.output_activation, r.loss_kind, r.metric_kind,
                        r.architecture_type) == (features, units, act, loss, metric, arch)
        assert time.perf_counter() - start < 1.0


# -- 2 ---------------------------------------------------------------------

def test_criterion_2_mock_data_sizing():
    with criterion(2, "mock data: 10f / 100C rows, balanced, |mean| and |std-1| < 1e-9"):
        sets = [(generate_mock_data(data_interface(f, "regression")), 10 * f, None) for f in (2, 7, 20)]
        for c in (2, 3, 5):
            task = "binary_classification" if c == 2 else "multiclass_classification"
            sets.append((generate_mock_data(data_interface(6, task, c)), 100 * c, c))
        for ds, rows, classes in sets:
            assert ds.num_rows == rows
            if classes:
                assert np.bincount(ds.labels.astype(int)).tolist() == [100] * classes
            assert np.max(np.abs(ds.features.mean(axis=0))) < 1e-9
            assert np.max(np.abs(ds.features.std(axis=0) - 1.0)) < 1e-9


# -- 3 ---------------------------------------------------------------------

def test_criterion_3_gradient_oracle():
    with criterion(3, "gradients: 50 random models, max relative error < 1e-4 vs central differences, < 30 s"):
        start = time.perf_counter()
        worst = 0.0
        for seed in range(50):
            model, x, t, loss = random_gradient_case(seed)
            worst = max(worst, max_relative_error(gradients(model, x, t, loss),
                                                  finite_diff_gradients(model, x, t, loss, epsilon=1e-5)))
        assert worst < 1e-4
        assert time.perf_counter() - start < 30.0


# -- 4 ---------------------------------------------------------------------

def test_criterion_4_truck_walkthrough(tmp_path):
    with criterion(4, "truck walkthrough: NaN data fails, imputed passes, lr 0.5 unstable, lr 0.001 passes, < 60 s"):
        start = time.perf_counter()
        di, mi = data_interface(7, "regression"), model_interface("FCNN", "regression")
        truck_dataset().to_csv(tmp_path / "truck.csv")
        raw = load_dataset(tmp_path / "truck.csv", "price")

        report = run_data_stage(raw, di, mi)
        assert not report.passed
        assert [(f.check_id, f.locus) for f in report.findings] == [("missing_values", "mileage")]

        forced = run_data_stage(raw, di, mi, DataStageConfig(force_learnability=True))
        assert "data_nonfinite_loss" in forced.check_ids()

        assert run_data_stage(mean_impute(raw), di, mi).passed

        spec = regression_spec(7, hidden=64, optimizer="sgd", lr=0.5)
        unstable = run_model_stage(spec, di)
        flagged = [bool({f.check_id for f in run} & {"oscillating_loss", "nonfinite_loss"})
                   for run in unstable.per_run_findings]
        assert sum(flagged) >= 2
        assert not unstable.passed

        fixed = run_model_stage(spec.replace(learning_rate=0.001), di)
        assert fixed.passed
        assert time.perf_counter() - start < 60.0


# -- 5 ---------------------------------------------------------------------

def _with_column(ds: Dataset, j: int, values) -> Dataset:
    columns = [list(c) for c in ds.raw_features]
    columns[j] = list(values)
    return Dataset(ds.feature_names, columns, ds.label_name, ds.raw_labels)


def _with_labels(ds: Dataset, labels) -> Dataset:
    return Dataset(ds.feature_names, ds.raw_features, ds.label_name, list(labels))


REG7 = data_interface(7, "regression")
MULTI5 = data_interface(5, "multiclass_classification", 3)


def _reg(seed):
    return generate_mock_data(REG7, MockDataConfig(seed=seed))


def _multi(seed, classes=3):
    return generate_mock_data(data_interface(5, "multiclass_classification", classes), MockDataConfig(seed=seed))


def _scaled(seed):
    ds = _reg(seed)
    return _with_column(ds, 0, [repr(float(v) * 1000.0) for v in ds.features[:, 0]])


def _nan_cells(seed):
    ds = _reg(seed)
    return _with_column(ds, 2, ["" if i % 9 == 0 else c for i, c in enumerate(ds.raw_features[2])])


def _blank_labels(seed):
    ds = _multi(seed)
    return _with_labels(ds, ["" if i < 3 else v for i, v in enumerate(ds.raw_labels)])


def _imbalanced(seed):
    ds = _multi(seed)
    drop = [i for i, v in enumerate(ds.labels) if v == 0][:55]
    return ds.take([i for i in range(ds.num_rows) if i not in set(drop)])


def _strings(seed):
    ds = _multi(seed)
    return _with_column(ds, 4, ["low" if v < 0 else "high" for v in ds.features[:, 4]])


def _permuted(seed):
    ds = _multi(seed)
    labels = list(ds.raw_labels)
    np.random.default_rng(seed).shuffle(labels)
    return _with_labels(ds, labels)


# (category, expected check_id, buggy builder, clean builder, data interface)
DATA_CORPUS = [
    ("missing scaling", "missing_scaling", _scaled, _reg, REG7),
    ("labels not matching", "label_mismatch", lambda s: _multi(s, classes=4), _multi, MULTI5),
    ("missing values", "missing_values", _nan_cells, _reg, REG7),
    ("missing labels", "missing_labels", _blank_labels, _multi, MULTI5),
    ("class imbalance", "class_imbalance", _imbalanced, _multi, MULTI5),
    ("missing encoding", "missing_encoding", _strings, _multi, MULTI5),
    ("model not learning", "model_not_learning", _permuted, _multi, MULTI5),
]

REG4 = data_interface(4, "regression")
BIN4 = data_interface(4, "binary_classification")
MULTI4 = data_interface(4, "multiclass_classification", 3)

# (category, expected check_id, buggy spec, clean spec, data interface)
MODEL_CORPUS = [
    ("input shape", "input_shape", regression_spec(6), regression_spec(7), REG7),
    ("output shape", "output_shape", multiclass_spec(num_classes=4), multiclass_spec(), MULTI4),
    ("missing activations", "missing_activation",
     regression_spec().replace(layers=(dense(64), dense(1, "linear"))), regression_spec(), REG7),
    ("wrong output activation", "output_activation",
     regression_spec().replace(layers=(dense(64, "relu"), dense(1, "sigmoid"))), regression_spec(), REG7),
    ("learning rate out of range", "learning_rate", binary_spec(lr=5.0), binary_spec(), BIN4),
    ("wrong loss", "loss_function", binary_spec(loss_kind="mse"), binary_spec(), BIN4),
    ("incorrect metrics", "metrics", regression_spec(metrics=("accuracy",)), regression_spec(), REG7),
    ("oscillating loss", "oscillating_loss", regression_spec(4, hidden=32, optimizer="sgd", lr=0.3),
     regression_spec(4, hidden=32, optimizer="sgd", lr=0.001), REG4),
    ("slow convergence", "slow_convergence", regression_spec(optimizer="sgd", lr=1e-5), regression_spec(), REG7),
]


def _data_report(dataset, di, seed):
    return run_data_stage(dataset, di, model_interface("FCNN", di.task_type), DataStageConfig(seed=seed))


def test_criterion_5_injected_bug_corpus():
    with criterion(5, "bug corpus: every category flagged with its check id, clean pairs silent, "
                      "seeds 1/42/1337, < 2 min"):
        start = time.perf_counter()
        misses = []
        for seed in SEEDS:
            for category, check_id, buggy, clean, di in DATA_CORPUS:
                if check_id not in _data_report(buggy(seed), di, seed).check_ids():
                    misses.append((seed, category, "not flagged"))
                if _data_report(clean(seed), di, seed).findings:
                    misses.append((seed, category, "clean pair has findings"))
            for category, check_id, buggy, clean, di in MODEL_CORPUS:
                config = ModelStageConfig(seed=seed)
                if check_id not in run_model_stage(buggy, di, config).check_ids():
                    misses.append((seed, category, "not flagged"))
                if run_model_stage(clean, di, config).findings:
                    misses.append((seed, category, "clean pair has findings"))
        assert misses == []
        assert time.perf_counter() - start < 120.0


# -- 6 ---------------------------------------------------------------------

def test_criterion_6_cli_determinism(tmp_path, capsys):
    with criterion(6, "determinism: every CLI command twice gives byte-identical output"):
        di = tmp_path / "di.json"
        di.write_text(data_interface(5, "multiclass_classification", 3).to_json())
        mi = tmp_path / "mi.json"
        mi.write_text(model_interface("CNN", "multiclass_classification").to_json())
        model = tmp_path / "model.json"
        model.write_text(multiclass_spec(5).to_json())
        data = tmp_path / "data.csv"
        _blank_labels(42).to_csv(data)

        commands = [
            ["check-data", "--data", str(data), "--label", "target", "--data-interface", str(di),
             "--model-interface", str(mi), "--format", "json", "--force-learnability"],
            ["check-model", "--model", str(model), "--data-interface", str(di), "--format", "json"],
            ["check-model", "--model", str(model), "--data-interface", str(di), "--format", "text", "--seed", "7"],
            ["gen-mock-model", "--data-interface", str(di), "--model-interface", str(mi)],
        ]
        for argv in commands:
            outputs = []
            for _ in range(2):
                main(argv)
                outputs.append(capsys.readouterr().out.encode())
            assert outputs[0] == outputs[1] and outputs[0]
            if "json" in argv:
                json.loads(outputs[0])
        mock = [tmp_path / "m1.csv", tmp_path / "m2.csv"]
        for path in mock:
            main(["gen-mock-data", "--data-interface", str(di), "--out", str(path), "--seed", "5"])
        assert mock[0].read_bytes() == mock[1].read_bytes()


# -- 7 ---------------------------------------------------------------------

PAIRS = [(arch, task, features)
         for arch in ("FCNN", "CNN")
         for task in ("regression", "binary_classification", "multiclass_classification")
         for features in (4, 10)]


def test_criterion_7_self_consistency():
    with criterion(7, "self-consistency: 12 interface pairs, mock data passes data stage, "
                      "mock model passes structural checks"):
        assert len(PAIRS) == 12
        failures = []
        for arch, task, features in PAIRS:
            di = data_interface(features, task)
            mi = model_interface(arch, task)
            report = run_data_stage(generate_mock_data(di), di, mi)
            if not report.passed or report.findings:
                failures.append((arch, task, features, "data", sorted(report.check_ids())))
            spec = mock_model_spec(mock_model_recipe(mi, features, di.num_classes), features)
            config = ModelStageConfig()
            checks = [
                model_checks.check_input_shape(spec, di),
                model_checks.check_output_shape(spec, di),
                model_checks.check_hidden_activations(spec),
                model_checks.check_output_activation(spec, di, config),
                model_checks.check_learning_rate(spec, config),
                model_checks.check_loss_function(spec, di),
                model_checks.check_metrics(spec, di),
            ]
            assert len(checks) == len(STRUCTURAL_CHECKS)
            structural = [f.check_id for found in checks for f in found]
            if structural:
                failures.append((arch, task, features, "model", structural))
        assert failures == []


# -- 8 ---------------------------------------------------------------------

def test_criterion_8_majority_rule():
    with criterion(8, "majority rule: 1 of 3 runs dropped, 2 of 3 kept"):
        def firing_in(runs):
            def check(run_index, seed):
                hit = run_index in runs
                return ([Finding("oscillating_loss", "error", "synthetic", {}, "synthetic")] if hit else []), None
            return check

        for runs in ({0}, {1}, {2}):
            kept, _, _ = run_repeated(firing_in(runs), 3, 42)
            assert kept == []
        for runs in ({0, 1}, {0, 2}, {1, 2}):
            kept, _, _ = run_repeated(firing_in(runs), 3, 42)
            assert [f.check_id for f in kept] == ["oscillating_loss"]
            assert kept[0].evidence["runs_flagged"] == sorted(runs)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
