"""
Interfaces between the two pipeline stages, the declarative model spec,
and CSV dataset ingestion with per-column profiling.

The interfaces and model spec are JSON documents with a fixed field set;
unknown fields are rejected so that typos surface as parse errors.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .engine import ACTIVATIONS, LAYER_KINDS, LOSSES, METRICS, OPTIMIZERS, LayerDef, validate_layer_list
from .errors import ContractError, ParseError

DATA_KINDS = ("numeric", "categorical", "mixed")
TASK_TYPES = ("regression", "binary_classification", "multiclass_classification")
ARCHITECTURES = ("FCNN", "CNN")

MISSING_TOKENS = frozenset({"", "nan", "na", "n/a", "null", "?"})

# A column is numeric when at least this share of its non-missing cells parse.
NUMERIC_MAJORITY = 0.9


def is_classification(task_type: str) -> bool:
    return task_type != "regression"


def _expect_enum(name: str, value, allowed: Sequence[str]) -> str:
    if value not in allowed:
        raise ParseError(f"{name}: invalid value {value!r}; expected one of {', '.join(allowed)}")
    return value


def _expect_int(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ParseError(f"{name}: expected an integer >= {minimum}, got {value!r}")
    return value


def _load_object(text: str, what: str, allowed: set[str], required: set[str]) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{what}: expected a JSON object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ParseError(f"{what}: unknown field(s) {', '.join(unknown)}; allowed: {', '.join(sorted(allowed))}")
    missing = sorted(required - set(doc))
    if missing:
        raise ParseError(f"{what}: missing field(s) {', '.join(missing)}")
    return doc


# -- interfaces ------------------------------------------------------------

@dataclass(frozen=True)
class DataInterface:
    """What the data-preparation stage exposes to model design."""

    num_features: int
    data_kind: str
    task_type: str
    num_classes: int

    def __post_init__(self):
        if isinstance(self.num_features, bool) or not isinstance(self.num_features, int) or self.num_features < 1:
            raise ContractError(f"num_features must be a positive integer, got {self.num_features!r}")
        if self.data_kind not in DATA_KINDS:
            raise ContractError(f"data_kind must be one of {', '.join(DATA_KINDS)}")
        if self.task_type not in TASK_TYPES:
            raise ContractError(f"task_type must be one of {', '.join(TASK_TYPES)}")
        check_task_classes(self.task_type, self.num_classes)

    def to_dict(self) -> dict:
        return {
            "num_features": self.num_features,
            "data_kind": self.data_kind,
            "task_type": self.task_type,
            "num_classes": self.num_classes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def check_task_classes(task_type: str, num_classes) -> None:
    """Enforce regression => 1 class, binary => 2, multiclass => more than 2."""
    if isinstance(num_classes, bool) or not isinstance(num_classes, int) or num_classes < 1:
        raise ContractError(f"num_classes must be a positive integer, got {num_classes!r}")
    if task_type == "regression" and num_classes != 1:
        raise ContractError(f"invariant violated: regression requires num_classes == 1, got {num_classes}")
    if task_type == "binary_classification" and num_classes != 2:
        raise ContractError(
            f"invariant violated: binary_classification requires num_classes == 2, got {num_classes}"
        )
    if task_type == "multiclass_classification" and num_classes <= 2:
        raise ContractError(
            f"invariant violated: multiclass_classification requires num_classes > 2, got {num_classes}"
        )


@dataclass(frozen=True)
class ModelInterface:
    """What the model-design stage exposes to data preparation."""

    architecture_type: str
    task_type: str

    def __post_init__(self):
        if self.architecture_type not in ARCHITECTURES:
            raise ContractError(f"architecture_type must be one of {', '.join(ARCHITECTURES)}")
        if self.task_type not in TASK_TYPES:
            raise ContractError(f"task_type must be one of {', '.join(TASK_TYPES)}")

    def to_dict(self) -> dict:
        return {"architecture_type": self.architecture_type, "task_type": self.task_type}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def parse_data_interface(text: str) -> DataInterface:
    fields_ = {"num_features", "data_kind", "task_type", "num_classes"}
    doc = _load_object(text, "data interface", fields_, fields_)
    try:
        return DataInterface(
            num_features=_expect_int("num_features", doc["num_features"]),
            data_kind=_expect_enum("data_kind", doc["data_kind"], DATA_KINDS),
            task_type=_expect_enum("task_type", doc["task_type"], TASK_TYPES),
            num_classes=_expect_int("num_classes", doc["num_classes"]),
        )
    except ContractError as exc:
        raise ContractError(f"data interface: {exc}") from None


def parse_model_interface(text: str) -> ModelInterface:
    fields_ = {"architecture_type", "task_type"}
    doc = _load_object(text, "model interface", fields_, fields_)
    return ModelInterface(
        architecture_type=_expect_enum("architecture_type", doc["architecture_type"], ARCHITECTURES),
        task_type=_expect_enum("task_type", doc["task_type"], TASK_TYPES),
    )


# -- model spec ------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A user's model, as a layer list plus its compile settings.

    Shapes are not checked here; composition errors are reported by the
    model-stage checks.
    """

    input_dim: int
    layers: tuple[LayerDef, ...]
    loss_kind: str
    optimizer: str
    learning_rate: float
    metrics: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        validate_layer_list(self.layers)
        if not math.isfinite(self.learning_rate):
            raise ContractError(f"learning_rate must be a finite number, got {self.learning_rate!r}")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [layer_to_dict(layer) for layer in self.layers],
            "loss_kind": self.loss_kind,
            "optimizer": self.optimizer,
            "learning_rate": self.learning_rate,
            "metrics": list(self.metrics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)


def layer_to_dict(layer: LayerDef) -> dict:
    out: dict = {"kind": layer.kind}
    for name in ("units", "filters", "kernel_size"):
        value = getattr(layer, name)
        if value is not None:
            out[name] = value
    if layer.kind != "flatten":
        out["activation"] = layer.activation
    return out


_LAYER_FIELDS = {
    "dense": ({"kind", "units", "activation"}, {"kind", "units"}),
    "conv1d": ({"kind", "filters", "kernel_size", "activation"}, {"kind", "filters", "kernel_size"}),
    "flatten": ({"kind"}, {"kind"}),
    "activation": ({"kind", "activation"}, {"kind", "activation"}),
}


def _parse_layer(i: int, raw) -> LayerDef:
    if not isinstance(raw, dict):
        raise ParseError(f"layers[{i}]: expected an object")
    kind = _expect_enum(f"layers[{i}].kind", raw.get("kind"), LAYER_KINDS)
    allowed, required = _LAYER_FIELDS[kind]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ParseError(f"layers[{i}] ({kind}): unknown field(s) {', '.join(unknown)}")
    missing = sorted(required - set(raw))
    if missing:
        raise ParseError(f"layers[{i}] ({kind}): missing field(s) {', '.join(missing)}")
    kwargs = {}
    for name in ("units", "filters", "kernel_size"):
        if name in raw:
            kwargs[name] = _expect_int(f"layers[{i}].{name}", raw[name])
    if "activation" in raw:
        kwargs["activation"] = _expect_enum(f"layers[{i}].activation", raw["activation"], ACTIVATIONS)
    try:
        return LayerDef(kind=kind, **kwargs)
    except ContractError as exc:
        raise ParseError(f"layers[{i}]: {exc}") from None


def parse_model_spec(text: str) -> ModelSpec:
    """Parse a model spec document.

    Example::

        {"input_dim": 7,
         "layers": [{"kind": "dense", "units": 64, "activation": "relu"},
                    {"kind": "dense", "units": 1, "activation": "linear"}],
         "loss_kind": "mse", "optimizer": "adam", "learning_rate": 0.001,
         "metrics": ["mae"]}
    """
    allowed = {"input_dim", "layers", "loss_kind", "optimizer", "learning_rate", "metrics"}
    required = allowed - {"metrics"}
    doc = _load_object(text, "model spec", allowed, required)
    input_dim = _expect_int("input_dim", doc["input_dim"])
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list):
        raise ParseError("layers: expected a list")
    if not raw_layers:
        raise ParseError("layers: a model needs at least one layer")
    layers = tuple(_parse_layer(i, raw) for i, raw in enumerate(raw_layers))
    loss_kind = _expect_enum("loss_kind", doc["loss_kind"], LOSSES)
    optimizer = _expect_enum("optimizer", doc["optimizer"], OPTIMIZERS)
    lr = doc["learning_rate"]
    if isinstance(lr, bool) or not isinstance(lr, (int, float)) or not math.isfinite(lr):
        raise ParseError(f"learning_rate: expected a finite number, got {lr!r}")
    metrics = doc.get("metrics", [])
    if not isinstance(metrics, list):
        raise ParseError("metrics: expected a list")
    metrics = tuple(_expect_enum("metrics[]", m, METRICS) for m in metrics)
    try:
        return ModelSpec(input_dim, layers, loss_kind, optimizer, float(lr), metrics)
    except ContractError as exc:
        raise ParseError(f"model spec: {exc}") from None


# -- datasets --------------------------------------------------------------

def is_missing_token(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_real(cell: str) -> float | None:
    try:
        return float(cell)
    except ValueError:
        return None


@dataclass(frozen=True)
class ColumnProfile:
    """Summary statistics of one CSV column.

    Statistics cover finite, non-missing numeric cells only.  When no such
    cell exists, min/max/mean/std are None and ``stats_defined`` is False.
    ``std`` is the population standard deviation.
    """

    name: str
    kind: str
    missing_count: int
    min: float | None
    max: float | None
    mean: float | None
    std: float | None
    distinct_count: int
    infinite_count: int = 0
    zero_variance: bool = False

    @property
    def stats_defined(self) -> bool:
        return self.mean is not None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def infer_column_profile(values: Sequence[str], name: str = "") -> ColumnProfile:
    """Classify a column and compute its statistics.

    Kind is numeric when at least 90% of non-missing cells parse as reals,
    categorical when none do, mixed otherwise.  In a numeric column the
    stray unparseable cells count as missing.
    """
    if len(values) == 0:
        raise ContractError("cannot profile an empty column")
    present = [v.strip() for v in values if not is_missing_token(v)]
    parsed = [_parse_real(v) for v in present]
    n_parsed = sum(p is not None for p in parsed)
    missing = len(values) - len(present)
    if not present or n_parsed / len(present) >= NUMERIC_MAJORITY:
        kind = "numeric"
        missing += len(present) - n_parsed
        distinct = {p for p in parsed if p is not None}
    elif n_parsed == 0:
        kind = "categorical"
        distinct = set(present)
    else:
        kind = "mixed"
        distinct = {p if p is not None else s for p, s in zip(parsed, present)}
    finite = [p for p in parsed if p is not None and math.isfinite(p)]
    infinite = sum(1 for p in parsed if p is not None and not math.isfinite(p))
    if finite:
        # fsum is exactly rounded, so the statistics do not depend on row order
        mean = math.fsum(finite) / len(finite)
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in finite) / len(finite))
        lo, hi = min(finite), max(finite)
        zero_var = std == 0.0
    else:
        mean = std = lo = hi = None
        zero_var = False
    return ColumnProfile(
        name=name,
        kind=kind,
        missing_count=missing,
        min=lo,
        max=hi,
        mean=mean,
        std=std,
        distinct_count=len(distinct),
        infinite_count=infinite,
        zero_variance=zero_var,
    )


def _column_to_floats(values: Sequence[str]) -> np.ndarray:
    out = np.full(len(values), np.nan)
    for i, v in enumerate(values):
        if not is_missing_token(v):
            parsed = _parse_real(v.strip())
            if parsed is not None:
                out[i] = parsed
    return out


def format_real(value: float) -> str:
    """Render a float for CSV output; integral values keep a short form."""
    value = float(value)
    if math.isfinite(value) and value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


@dataclass
class Dataset:
    """A parsed tabular dataset: features, labels, and column profiles.

    ``features`` holds NaN wherever a cell is missing or not a number;
    the raw strings are kept alongside for the categorical checks.
    """

    feature_names: list[str]
    raw_features: list[list[str]]  # column-major
    label_name: str
    raw_labels: list[str]
    features: np.ndarray = field(init=False, repr=False)
    labels: np.ndarray = field(init=False, repr=False)
    profiles: list[ColumnProfile] = field(init=False, repr=False)
    label_profile: ColumnProfile = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.raw_labels)
        if len(self.feature_names) != len(self.raw_features):
            raise ContractError("one name per feature column is required")
        for name, col in zip(self.feature_names, self.raw_features):
            if len(col) != n:
                raise ContractError(f"column {name!r} has {len(col)} rows, labels have {n}")
        if self.raw_features:
            self.features = np.column_stack([_column_to_floats(c) for c in self.raw_features])
        else:
            self.features = np.zeros((n, 0))
        self.labels = _column_to_floats(self.raw_labels)
        self.profiles = [infer_column_profile(c, name) for name, c in zip(self.feature_names, self.raw_features)]
        self.label_profile = infer_column_profile(self.raw_labels, self.label_name)

    @property
    def num_rows(self) -> int:
        return len(self.raw_labels)

    @property
    def num_features(self) -> int:
        return len(self.feature_names)

    @classmethod
    def from_arrays(cls, features, labels, feature_names=None, label_name: str = "label") -> "Dataset":
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ContractError("expected a (rows, features) matrix and a matching label vector")
        names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
        raw = [[format_real(v) for v in X[:, j]] for j in range(X.shape[1])]
        return cls(names, raw, label_name, [format_real(v) for v in y])

    def class_ids(self) -> tuple[np.ndarray, list[float]]:
        """Map parsed labels to 0..K-1 in sorted label order (NaN stays -1)."""
        values = sorted({float(v) for v in self.labels if math.isfinite(v)})
        lookup = {v: i for i, v in enumerate(values)}
        ids = np.array([lookup.get(float(v), -1) if math.isfinite(v) else -1 for v in self.labels])
        return ids, values

    def one_hot(self, num_classes: int) -> np.ndarray:
        ids, _ = self.class_ids()
        out = np.zeros((self.num_rows, num_classes))
        ok = (ids >= 0) & (ids < num_classes)
        out[np.flatnonzero(ok), ids[ok]] = 1.0
        out[~ok] = np.nan
        return out

    def rows(self):
        for i in range(self.num_rows):
            yield [col[i] for col in self.raw_features] + [self.raw_labels[i]]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.feature_names + [self.label_name])
            writer.writerows(self.rows())

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = list(rows)
        return Dataset(
            list(self.feature_names),
            [[col[i] for i in rows] for col in self.raw_features],
            self.label_name,
            [self.raw_labels[i] for i in rows],
        )


def load_dataset(path, label_column) -> Dataset:
    """Read an RFC-4180 CSV with a header row.

    ``label_column`` is a header name or a zero-based column index.
    """
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: no such file")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise ParseError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    if all(_parse_real(h) is not None for h in header):
        raise ParseError(f"{path}: missing header row (first row is all numbers)")
    body = rows[1:]
    while body and body[-1] == []:
        body.pop()
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {lineno} has {len(row)} fields, header has {len(header)}")
    if not body:
        raise ParseError(f"{path}: no data rows")
    label_idx = _resolve_label(header, label_column, path)
    feature_idx = [j for j in range(len(header)) if j != label_idx]
    return Dataset(
        [header[j] for j in feature_idx],
        [[row[j] for row in body] for j in feature_idx],
        header[label_idx],
        [row[label_idx] for row in body],
    )


def _resolve_label(header: list[str], label_column, path) -> int:
    if isinstance(label_column, str) and label_column in header:
        return header.index(label_column)
    try:
        idx = int(label_column)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: unknown label column {label_column!r}; columns: {', '.join(header)}") from None
    if not 0 <= idx < len(header):
        raise ParseError(f"{path}: label column index {idx} out of range (0..{len(header) - 1})")
    return idx
