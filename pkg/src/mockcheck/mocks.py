"""
Mock objects: a three-layer mock model chosen by decision table, and
clean, balanced, standardized mock data sized from the data interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import LayerDef, Model
from .errors import ContractError
from .pipeline import DataInterface, Dataset, ModelInterface, ModelSpec, check_task_classes

CNN_FILTERS = 8
CNN_KERNEL = 3

# Mock model compile settings used when the mock model itself is trained.
MOCK_OPTIMIZER = "adam"
MOCK_LEARNING_RATE = 0.001

REGRESSION_ROWS_PER_FEATURE = 10
ROWS_PER_CLASS = 100

# Closest pair of class centroids sits this many class_sep apart.
CENTROID_SPACING = 3.0


@dataclass(frozen=True)
class MockModelRecipe:
    hidden_units: int
    output_units: int
    output_activation: str
    loss_kind: str
    metric_kind: str
    architecture_type: str


# (task_type) -> (output units or None for "# of classes", activation, loss, metric)
_ACTIONS = {
    "regression": (1, "linear", "mse", "mae"),
    "binary_classification": (2, "sigmoid", "binary_crossentropy", "accuracy"),
    "multiclass_classification": (None, "softmax", "categorical_crossentropy", "accuracy"),
}


def mock_model_recipe(model_interface: ModelInterface, num_features: int, num_classes: int) -> MockModelRecipe:
    """Look up the decision-table column for (task, architecture, classes)."""
    if isinstance(num_features, bool) or not isinstance(num_features, int) or num_features < 1:
        raise ContractError(f"num_features must be a positive integer, got {num_features!r}")
    check_task_classes(model_interface.task_type, num_classes)
    units, activation, loss, metric = _ACTIONS[model_interface.task_type]
    return MockModelRecipe(
        hidden_units=num_features,
        output_units=num_classes if units is None else units,
        output_activation=activation,
        loss_kind=loss,
        metric_kind=metric,
        architecture_type=model_interface.architecture_type,
    )


def mock_model_layers(recipe: MockModelRecipe, num_features: int) -> list[LayerDef]:
    output = LayerDef("dense", units=recipe.output_units, activation=recipe.output_activation)
    if recipe.architecture_type == "FCNN":
        return [LayerDef("dense", units=recipe.hidden_units, activation="relu"), output]
    if num_features < CNN_KERNEL:
        raise ContractError(
            f"a CNN mock needs at least {CNN_KERNEL} features (got {num_features}); use an FCNN instead"
        )
    return [
        LayerDef("conv1d", filters=CNN_FILTERS, kernel_size=CNN_KERNEL, activation="relu"),
        LayerDef("flatten"),
        output,
    ]


def mock_model_spec(recipe: MockModelRecipe, num_features: int) -> ModelSpec:
    """The mock model as a declarative spec, e.g. for export or linting."""
    return ModelSpec(
        input_dim=num_features,
        layers=tuple(mock_model_layers(recipe, num_features)),
        loss_kind=recipe.loss_kind,
        optimizer=MOCK_OPTIMIZER,
        learning_rate=MOCK_LEARNING_RATE,
        metrics=(recipe.metric_kind,),
    )


def build_mock_model(recipe: MockModelRecipe, num_features: int, seed: int = 0) -> Model:
    return Model(mock_model_layers(recipe, num_features), num_features, seed=seed)


@dataclass(frozen=True)
class MockDataConfig:
    seed: int = 0
    class_sep: float = 2.0
    noise_fraction: float = 0.1

    def __post_init__(self):
        if not self.class_sep > 0:
            raise ContractError("class_sep must be positive")
        if not self.noise_fraction > 0:
            raise ContractError("noise_fraction must be positive")


def standardize_array(X: np.ndarray) -> np.ndarray:
    """Per-column ``(x - mean) / std`` with population std; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    centered = X - mean
    safe = np.where(std > 0, std, 1.0)
    return np.where(std > 0, centered / safe, 0.0)


def standardize(dataset: Dataset) -> Dataset:
    """Standardize every feature column; labels are left untouched."""
    X = dataset.features
    if dataset.profiles and any(p.kind != "numeric" for p in dataset.profiles):
        bad = [p.name for p in dataset.profiles if p.kind != "numeric"]
        raise ContractError(f"standardize needs numeric columns; not numeric: {', '.join(bad)}")
    Z = standardize_array(X)
    out = Dataset.from_arrays(Z, np.zeros(dataset.num_rows), dataset.feature_names, dataset.label_name)
    return Dataset(out.feature_names, out.raw_features, dataset.label_name, list(dataset.raw_labels))


def _spread_directions(num_classes: int, num_features: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct unit directions, as far apart as the dimension allows,
    randomly rotated."""
    C, f = num_classes, num_features
    if f == 1:
        pos = np.arange(C) - (C - 1) / 2.0
        return (pos / np.max(np.abs(pos)))[:, None]
    if C - 1 <= f:
        # regular simplex: centred identity, projected onto its own span
        E = np.eye(C) - 1.0 / C
        _, _, vt = np.linalg.svd(E)
        base = E @ vt[: C - 1].T
    else:
        angles = 2.0 * np.pi * np.arange(C) / C
        base = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    base = base / np.linalg.norm(base, axis=1, keepdims=True)
    base = np.pad(base, ((0, 0), (0, f - base.shape[1])))
    q, r = np.linalg.qr(rng.standard_normal((f, f)))
    q = q * np.sign(np.diag(r))
    return base @ q.T


def class_centroids(num_classes: int, num_features: int, class_sep: float, rng: np.random.Generator) -> np.ndarray:
    dirs = _spread_directions(num_classes, num_features, rng)
    gaps = [np.linalg.norm(dirs[i] - dirs[j]) for i in range(num_classes) for j in range(i + 1, num_classes)]
    return dirs * (CENTROID_SPACING * class_sep / min(gaps))


def generate_mock_data(data_interface: DataInterface, config: MockDataConfig | None = None) -> Dataset:
    """Synthetic, clean, standardized data matching the data interface.

    Regression: ``10 * num_features`` rows of a noisy linear signal.
    Classification: 100 rows per class drawn from unit-covariance Gaussians
    around well-separated centroids; labels are integer class ids.
    """
    config = config or MockDataConfig()
    rng = np.random.default_rng(config.seed)
    f = data_interface.num_features
    names = [f"feature_{j}" for j in range(f)]
    if data_interface.task_type == "regression":
        n = REGRESSION_ROWS_PER_FEATURE * f
        X = rng.standard_normal((n, f))
        w = rng.standard_normal(f)
        signal = X @ w
        scale = config.noise_fraction * float(np.std(signal))
        y = signal + rng.normal(0.0, scale, size=n) if scale > 0 else signal
        y = standardize_array(y[:, None])[:, 0]
    else:
        C = data_interface.num_classes
        centroids = class_centroids(C, f, config.class_sep, rng)
        y = np.repeat(np.arange(C), ROWS_PER_CLASS).astype(np.float64)
        X = centroids[y.astype(int)] + rng.standard_normal((C * ROWS_PER_CLASS, f))
        order = rng.permutation(len(y))
        X, y = X[order], y[order]
    return Dataset.from_arrays(standardize_array(X), y, names, "target")


def nearest_centroid_accuracy(X: np.ndarray, class_ids: np.ndarray) -> float:
    """Training accuracy of the nearest-class-mean rule, by brute force."""
    classes = np.unique(class_ids)
    means = np.stack([X[class_ids == c].mean(axis=0) for c in classes])
    dist = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=-1)
    return float(np.mean(classes[np.argmin(dist, axis=1)] == class_ids))


def mock_targets(dataset: Dataset, task_type: str, num_classes: int, output_units: int | None = None) -> np.ndarray:
    """Targets shaped for a model output: a column for regression or a
    single-unit binary output, one-hot otherwise."""
    if task_type == "regression":
        return dataset.labels[:, None]
    units = num_classes if output_units is None else output_units
    if units == 1:
        ids, _ = dataset.class_ids()
        out = ids.astype(np.float64)[:, None]
        out[ids < 0] = math.nan
        return out
    return dataset.one_hot(units)
