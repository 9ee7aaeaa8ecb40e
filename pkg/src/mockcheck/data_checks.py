"""
Data-preparation stage: property assertions on a dataset, then a
learnability probe that trains the mock model on it.
"""

from __future__ import annotations

import dataclasses
import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .engine import TrainConfig, compute_loss, evaluate, forward, mean_max_probability, train
from .errors import ContractError
from .findings import ERROR, WARNING, Finding, json_number
from .mocks import build_mock_model, mock_model_recipe, mock_targets
from .pipeline import DataInterface, Dataset, ModelInterface, is_classification, is_missing_token
from .report import Report, run_repeated

STRUCTURAL_CHECKS = (
    "missing_values",
    "missing_labels",
    "class_imbalance",
    "missing_encoding",
    "missing_scaling",
    "label_mismatch",
)
LEARNABILITY = "learnability"


@dataclass(frozen=True)
class TrainBudget:
    epochs: int = 20
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 0.01


@dataclass(frozen=True)
class DataStageConfig:
    imbalance_ratio_threshold: float = 1.5
    scaling_range_threshold: float = 20.0
    scaling_mean_threshold: float = 5.0
    learnability: TrainBudget = field(default_factory=TrainBudget)
    # share of rows held out to score accuracy and confidence
    holdout_fraction: float = 0.25
    # loss must fall below this share of its initial value (regression)
    loss_reduction_ratio: float = 0.9
    accuracy_margin: float = 0.1
    confidence_margin: float = 0.05
    runs: int = 3
    seed: int = 42
    force_learnability: bool = False

    def __post_init__(self):
        for name in ("imbalance_ratio_threshold", "scaling_range_threshold", "scaling_mean_threshold"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.runs < 1 or self.runs % 2 == 0:
            raise ContractError(f"runs must be a positive odd number, got {self.runs}")
        if not 0 <= self.holdout_fraction < 1:
            raise ContractError("holdout_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _column_finding(check_id, severity, message, profile, index, **evidence) -> Finding:
    return Finding(
        check_id,
        severity,
        message,
        {"column": profile.name, "column_index": index, **evidence},
        locus=profile.name,
    )


def check_missing_values(dataset: Dataset) -> list[Finding]:
    findings = []
    for j, p in enumerate(dataset.profiles):
        if p.missing_count or p.infinite_count:
            parts = []
            if p.missing_count:
                parts.append(f"{p.missing_count} missing")
            if p.infinite_count:
                parts.append(f"{p.infinite_count} infinite")
            findings.append(
                _column_finding(
                    "missing_values", ERROR,
                    f"column {p.name!r} has {' and '.join(parts)} value(s)",
                    p, j, missing_count=p.missing_count, infinite_count=p.infinite_count,
                )
            )
    return findings


def check_missing_labels(dataset: Dataset) -> list[Finding]:
    rows = [i for i, v in enumerate(dataset.labels) if not math.isfinite(v)]
    if dataset.label_profile.kind != "numeric":
        rows = [i for i, v in enumerate(dataset.raw_labels) if is_missing_token(v)]
    if not rows:
        return []
    return [
        Finding(
            "missing_labels", ERROR,
            f"label column {dataset.label_name!r} is missing in {len(rows)} of {dataset.num_rows} rows",
            {"column": dataset.label_name, "count": len(rows), "rows": rows[:10]},
            locus=dataset.label_name,
        )
    ]


def class_counts(dataset: Dataset) -> dict[str, int]:
    counts: Counter = Counter()
    for raw, parsed in zip(dataset.raw_labels, dataset.labels):
        if is_missing_token(raw):
            continue
        counts[repr(float(parsed)) if math.isfinite(parsed) else raw.strip()] += 1
    return dict(sorted(counts.items()))


def check_class_imbalance(dataset: Dataset, data_interface: DataInterface,
                          config: DataStageConfig | None = None) -> list[Finding] | None:
    """Warn when the largest class outnumbers the smallest by more than the
    threshold.  Returns None (not applicable) for regression."""
    config = config or DataStageConfig()
    if not is_classification(data_interface.task_type):
        return None
    counts = class_counts(dataset)
    if len(counts) < 2:
        return []
    ratio = max(counts.values()) / min(counts.values())
    if ratio <= config.imbalance_ratio_threshold:
        return []
    return [
        Finding(
            "class_imbalance", WARNING,
            f"largest class outnumbers smallest by {ratio:.2f}x "
            f"(threshold {config.imbalance_ratio_threshold})",
            {"class_counts": counts, "ratio": ratio},
        )
    ]


def check_categorical_encoding(dataset: Dataset) -> list[Finding]:
    findings = []
    for j, p in enumerate(dataset.profiles):
        if p.kind in ("categorical", "mixed"):
            findings.append(
                _column_finding(
                    "missing_encoding", ERROR,
                    f"column {p.name!r} holds {p.kind} (non-numeric) values "
                    f"with {p.distinct_count} distinct entries",
                    p, j, kind=p.kind, distinct_count=p.distinct_count,
                )
            )
    return findings


def check_scaling(dataset: Dataset, config: DataStageConfig | None = None) -> list[Finding]:
    """Warn on numeric feature columns with a wide range or an offset mean.
    Labels are not inspected."""
    config = config or DataStageConfig()
    findings = []
    for j, p in enumerate(dataset.profiles):
        if p.kind != "numeric" or not p.stats_defined:
            continue
        spread = p.max - p.min
        if spread > config.scaling_range_threshold or abs(p.mean) > config.scaling_mean_threshold:
            findings.append(
                _column_finding(
                    "missing_scaling", WARNING,
                    f"column {p.name!r} looks unscaled (range {spread:.4g}, mean {p.mean:.4g})",
                    p, j, min=p.min, max=p.max, mean=p.mean, range=spread,
                )
            )
    return findings


def check_label_problem_match(dataset: Dataset, data_interface: DataInterface) -> list[Finding]:
    task = data_interface.task_type
    lp = dataset.label_profile
    finite = [float(v) for v in dataset.labels if math.isfinite(v)]
    problems = []
    if task == "regression":
        if lp.kind != "numeric":
            problems.append(f"regression labels must be numeric, column is {lp.kind}")
    else:
        if lp.kind != "numeric":
            problems.append(f"class labels must be integer ids, column is {lp.kind}")
        elif any(not v.is_integer() for v in finite):
            problems.append("class labels must be integer ids, found non-integer values")
        distinct = len(set(finite)) if lp.kind == "numeric" else lp.distinct_count
        expected = data_interface.num_classes
        if distinct != expected:
            problems.append(f"{task} expects {expected} distinct labels, found {distinct}")
    if not problems:
        return []
    return [
        Finding(
            "label_mismatch", ERROR,
            "; ".join(problems),
            {"task_type": task, "label_kind": lp.kind, "distinct_labels": lp.distinct_count},
            locus=dataset.label_name,
        )
    ]


def _split(n: int, fraction: float, seed: int):
    order = np.random.default_rng(seed).permutation(n)
    hold = int(n * fraction)
    if hold < 2 or n - hold < 2:
        return order, order
    return order[hold:], order[:hold]


def learnability_run(dataset: Dataset, data_interface: DataInterface, model_interface: ModelInterface,
                     config: DataStageConfig, run_index: int, seed: int):
    """One training run of the mock model; returns (findings, trace record)."""
    task = data_interface.task_type
    C = data_interface.num_classes
    f = dataset.num_features
    recipe = mock_model_recipe(model_interface, f, C)
    targets = mock_targets(dataset, task, C, recipe.output_units)
    train_idx, hold_idx = _split(dataset.num_rows, config.holdout_fraction, seed)
    X = dataset.features
    model = build_mock_model(recipe, f, seed=seed)
    budget = config.learnability
    tc = TrainConfig(recipe.loss_kind, budget.optimizer, budget.learning_rate, budget.epochs,
                     budget.batch_size, seed, recipe.metric_kind)
    trace = train(model, X[train_idx], targets[train_idx], tc)
    record = {
        "check": LEARNABILITY,
        "run": run_index,
        "seed": seed,
        "metric_kind": trace.metric_kind,
        "losses": [json_number(v) for v in trace.losses],
        "metrics": [json_number(v) for v in trace.metrics],
    }
    bad = [k for k, v in enumerate(trace.losses, start=1) if not math.isfinite(v)]
    if bad or not math.isfinite(trace.initial_loss):
        epoch = bad[0] if bad else 0
        value = trace.losses[epoch - 1] if bad else trace.initial_loss
        return [
            Finding(
                "data_nonfinite_loss", ERROR,
                f"mock model loss is {value} at epoch {epoch}",
                {"epoch": epoch, "loss": json_number(value)},
            )
        ], record

    symptoms = []
    evidence: dict = {}
    if task == "regression":
        final = compute_loss(recipe.loss_kind, forward(model, X[train_idx]), targets[train_idx])
        evidence.update(initial_loss=json_number(trace.initial_loss), final_loss=json_number(final))
        if not final <= config.loss_reduction_ratio * trace.initial_loss:
            symptoms.append("high_loss")
    else:
        acc = evaluate(model, X[hold_idx], targets[hold_idx], "accuracy")
        conf = mean_max_probability(model, X[hold_idx])
        evidence.update(accuracy=acc, mean_confidence=conf)
        if acc < 1.0 / C + config.accuracy_margin:
            symptoms.append("frequent_misclassification")
        if conf < 1.0 / C + config.confidence_margin:
            symptoms.append("low_confidence")
    if not symptoms:
        return [], record
    evidence["symptoms"] = symptoms
    return [
        Finding(
            "model_not_learning", ERROR,
            f"mock model is not learning from the data ({', '.join(symptoms)})",
            evidence,
        )
    ], record


def check_data_learnability(dataset: Dataset, data_interface: DataInterface, model_interface: ModelInterface,
                            config: DataStageConfig | None = None):
    """Train the mock model ``config.runs`` times; majority-voted findings."""
    config = config or DataStageConfig()
    _check_dims(dataset, data_interface, model_interface)
    return run_repeated(
        lambda i, seed: learnability_run(dataset, data_interface, model_interface, config, i, seed),
        config.runs,
        config.seed,
    )


def _check_dims(dataset: Dataset, data_interface: DataInterface, model_interface: ModelInterface):
    if dataset.num_features != data_interface.num_features:
        raise ContractError(
            f"dataset has {dataset.num_features} feature columns but the data interface "
            f"declares num_features={data_interface.num_features}"
        )
    if model_interface.task_type != data_interface.task_type:
        raise ContractError(
            f"model interface task {model_interface.task_type!r} differs from data interface task "
            f"{data_interface.task_type!r}"
        )


def run_data_stage(dataset: Dataset, data_interface: DataInterface, model_interface: ModelInterface,
                   config: DataStageConfig | None = None) -> Report:
    """Run the property checks in fixed order, then the learnability probe.

    The probe only runs when no error-severity finding came before it,
    unless ``config.force_learnability`` is set.
    """
    config = config or DataStageConfig()
    _check_dims(dataset, data_interface, model_interface)
    findings: list[Finding] = []
    executed: list[str] = []
    skipped: dict[str, str] = {}
    timings: dict[str, float] = {}

    def timed(name, fn):
        start = time.perf_counter()
        result = fn()
        timings[name] = time.perf_counter() - start
        return result

    structural = {
        "missing_values": lambda: check_missing_values(dataset),
        "missing_labels": lambda: check_missing_labels(dataset),
        "class_imbalance": lambda: check_class_imbalance(dataset, data_interface, config),
        "missing_encoding": lambda: check_categorical_encoding(dataset),
        "missing_scaling": lambda: check_scaling(dataset, config),
        "label_mismatch": lambda: check_label_problem_match(dataset, data_interface),
    }
    for name in STRUCTURAL_CHECKS:
        result = timed(name, structural[name])
        if result is None:
            skipped[name] = "not applicable to regression"
            continue
        executed.append(name)
        findings.extend(result)

    per_run: list[list[Finding]] = []
    traces: list[dict] = []
    blocked = any(f.severity == ERROR for f in findings)
    if blocked and not config.force_learnability:
        skipped[LEARNABILITY] = "gated: structural errors must be fixed first"
    else:
        kept, per_run, traces = timed(
            LEARNABILITY, lambda: check_data_learnability(dataset, data_interface, model_interface, config)
        )
        executed.append(LEARNABILITY)
        findings.extend(kept)

    return Report(
        stage="data",
        interfaces={
            "data_interface": data_interface.to_dict(),
            "model_interface": model_interface.to_dict(),
            "dataset": {"rows": dataset.num_rows, "features": dataset.num_features, "label": dataset.label_name},
        },
        config=config.to_dict(),
        executed_checks=executed,
        findings=findings,
        skipped_checks=skipped,
        per_run_findings=per_run,
        traces=traces,
        timings=timings,
    )
