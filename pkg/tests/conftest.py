import numpy as np
import pytest

from mockcheck.engine import LayerDef
from mockcheck.pipeline import DataInterface, ModelInterface, ModelSpec

TASK_CLASSES = {"regression": 1, "binary_classification": 2, "multiclass_classification": 3}

# acceptance outcomes, printed in the terminal summary
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def data_interface(num_features=4, task="regression", num_classes=None, kind="numeric"):
    return DataInterface(num_features, kind, task, TASK_CLASSES[task] if num_classes is None else num_classes)


def model_interface(arch="FCNN", task="regression"):
    return ModelInterface(arch, task)


def dense(units, activation="none"):
    return LayerDef("dense", units=units, activation=activation)


def regression_spec(num_features=7, hidden=64, optimizer="adam", lr=0.001, **overrides):
    spec = ModelSpec(num_features, (dense(hidden, "relu"), dense(1, "linear")), "mse", optimizer, lr, ("mae",))
    return spec.replace(**overrides) if overrides else spec


def binary_spec(num_features=4, hidden=16, units=1, lr=0.001, **overrides):
    spec = ModelSpec(num_features, (dense(hidden, "relu"), dense(units, "sigmoid")),
                     "binary_crossentropy", "adam", lr, ("accuracy",))
    return spec.replace(**overrides) if overrides else spec


def multiclass_spec(num_features=4, num_classes=3, hidden=16, lr=0.001, **overrides):
    spec = ModelSpec(num_features, (dense(hidden, "relu"), dense(num_classes, "softmax")),
                     "categorical_crossentropy", "adam", lr, ("accuracy",))
    return spec.replace(**overrides) if overrides else spec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[1])):
        ok, text = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {text}")


def random_gradient_case(seed):
    """A small random model with a matching loss, inputs and targets."""
    from mockcheck.engine import Model

    r = np.random.default_rng(seed)
    f = int(r.integers(3, 7))
    layers = []
    if r.random() < 0.4:
        layers += [LayerDef("conv1d", filters=int(r.integers(1, 4)), kernel_size=int(r.integers(1, 4)),
                            activation=str(r.choice(["tanh", "sigmoid", "relu", "none"]))),
                   LayerDef("flatten")]
    for _ in range(int(r.integers(0, 3))):
        layers.append(dense(int(r.integers(2, 6)), str(r.choice(["tanh", "sigmoid", "relu", "linear"]))))
        if r.random() < 0.2:
            layers.append(LayerDef("activation", activation="tanh"))
    loss = str(r.choice(["mse", "binary_crossentropy", "categorical_crossentropy"]))
    out = int(r.integers(1, 4))
    if loss == "mse":
        layers.append(dense(out, str(r.choice(["linear", "tanh"]))))
    elif loss == "binary_crossentropy":
        layers.append(dense(out, "sigmoid"))
    else:
        out = max(out, 2)
        layers.append(dense(out, "softmax"))
    model = Model(layers, f, seed=seed)
    n = int(r.integers(2, 6))
    x = r.standard_normal((n, f))
    if loss == "mse":
        t = r.standard_normal((n, out))
    elif loss == "binary_crossentropy":
        t = r.integers(0, 2, size=(n, out)).astype(float)
    else:
        t = np.eye(out)[r.integers(0, out, size=n)]
    return model, x, t, loss


def max_relative_error(analytic, numeric):
    worst = 0.0
    for a, b in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


TRUCK_COLUMNS = ["engine_size", "mileage", "age", "load_capacity", "axles", "fuel_rate", "service_gap"]


def truck_dataset(rows=120, missing_rows=(3, 17, 42, 77), seed=0):
    """Seven-feature regression data in the style of a truck-price table,
    with missing cells injected into the ``mileage`` column."""
    from mockcheck.pipeline import Dataset

    r = np.random.default_rng(seed)
    X = r.normal(0.0, 1.5, size=(rows, 7)) + 1.0
    y = X @ r.normal(0.0, 1.0, size=7) + r.normal(0.0, 0.1, size=rows)
    ds = Dataset.from_arrays(X, y, TRUCK_COLUMNS, "price")
    mileage = ds.raw_features[1]
    for i in missing_rows:
        mileage[i] = ""
    return Dataset(ds.feature_names, ds.raw_features, "price", ds.raw_labels)


def mean_impute(dataset):
    from mockcheck.pipeline import Dataset, format_real

    columns = []
    for j, col in enumerate(dataset.raw_features):
        mean = float(np.nanmean(dataset.features[:, j]))
        columns.append([format_real(mean) if np.isnan(v) else c for c, v in zip(col, dataset.features[:, j])])
    return Dataset(dataset.feature_names, columns, dataset.label_name, dataset.raw_labels)
