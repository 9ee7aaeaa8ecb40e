"""
Model-design stage: structural assertions on a model spec against the data
interface, then training-dynamics analysis of the model on mock data.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import Model, TrainConfig, evaluate, infer_shapes, train
from .errors import ContractError, ShapeError
from .findings import ERROR, WARNING, Finding, json_number
from .mocks import MockDataConfig, generate_mock_data, mock_targets
from .pipeline import DataInterface, ModelSpec, is_classification
from .report import Report, run_repeated

STRUCTURAL_CHECKS = (
    "input_shape",
    "output_shape",
    "missing_activation",
    "output_activation",
    "learning_rate",
    "loss_function",
    "metrics",
)
DYNAMICS = "training_dynamics"

EXPECTED_LOSS = {
    "regression": "mse",
    "binary_classification": "binary_crossentropy",
    "multiclass_classification": "categorical_crossentropy",
}
ALLOWED_METRICS = {
    "regression": {"mae"},
    "binary_classification": {"accuracy"},
    "multiclass_classification": {"accuracy"},
}


@dataclass(frozen=True)
class DynamicsBudget:
    epochs: int = 60
    batch_size: int = 32
    sample_every: int = 5


@dataclass(frozen=True)
class ModelStageConfig:
    lr_min: float = 1e-6
    lr_max: float = 1.0
    dynamics: DynamicsBudget = field(default_factory=DynamicsBudget)
    oscillation_reversals: int = 3
    oscillation_amplitude_fraction: float = 0.10
    slow_convergence_fraction: float = 0.05
    accuracy_margin: float = 0.1
    class_sep: float = 2.0
    runs: int = 3
    seed: int = 42
    binary_output_strictness: str = "lenient"

    def __post_init__(self):
        if not self.lr_min < self.lr_max:
            raise ContractError("lr_min must be smaller than lr_max")
        if self.dynamics.sample_every < 1:
            raise ContractError("sample_every must be >= 1")
        if self.runs < 1 or self.runs % 2 == 0:
            raise ContractError(f"runs must be a positive odd number, got {self.runs}")
        if self.binary_output_strictness not in ("lenient", "strict"):
            raise ContractError("binary_output_strictness must be 'lenient' or 'strict'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- spec introspection ----------------------------------------------------

def _identity(activation: str) -> bool:
    return activation in ("linear", "none")


def output_layer_index(spec: ModelSpec) -> int | None:
    """Index of the last layer that owns parameters."""
    for i in range(len(spec.layers) - 1, -1, -1):
        if spec.layers[i].has_params:
            return i
    return None


def output_activation(spec: ModelSpec) -> str:
    """Activation finally applied to the network output; identity reads as linear."""
    act = "linear"
    out = output_layer_index(spec)
    start = 0 if out is None else out
    for layer in spec.layers[start:]:
        if layer.kind in ("dense", "conv1d", "activation") and not _identity(layer.activation):
            act = layer.activation
    return act


def output_units(spec: ModelSpec) -> int | None:
    """Width of the flat network output, or None if shapes do not compose
    or the output is not flat."""
    try:
        shapes = infer_shapes(spec.input_dim, spec.layers)
    except ShapeError:
        return None
    final = shapes[-1]
    return final[0] if len(final) == 1 else None


# -- structural checks -----------------------------------------------------

def check_input_shape(spec: ModelSpec, data_interface: DataInterface) -> list[Finding]:
    if spec.input_dim == data_interface.num_features:
        return []
    return [
        Finding(
            "input_shape", ERROR,
            f"input layer expects {spec.input_dim} features but the data interface provides "
            f"{data_interface.num_features}",
            {"input_dim": spec.input_dim, "num_features": data_interface.num_features, "layer_index": 0},
            locus="input",
        )
    ]


def check_output_shape(spec: ModelSpec, data_interface: DataInterface) -> list[Finding]:
    try:
        shapes = infer_shapes(spec.input_dim, spec.layers)
    except ShapeError as exc:
        return [Finding("output_shape", ERROR, f"layer shapes do not compose: {exc}", {}, locus="output")]
    final = shapes[-1]
    task = data_interface.task_type
    if len(final) != 1:
        return [
            Finding(
                "output_shape", ERROR,
                f"model output has shape {final}; add a flatten and a dense output layer",
                {"output_shape": list(final)}, locus="output",
            )
        ]
    units = final[0]
    if task == "regression":
        allowed = {1}
    elif task == "binary_classification":
        allowed = {1, 2}
    else:
        allowed = {data_interface.num_classes}
    if units in allowed:
        return []
    return [
        Finding(
            "output_shape", ERROR,
            f"output layer has {units} units; {task} expects {' or '.join(map(str, sorted(allowed)))}",
            {"output_units": units, "expected": sorted(allowed), "layer_index": output_layer_index(spec)},
            locus="output",
        )
    ]


def check_hidden_activations(spec: ModelSpec) -> list[Finding]:
    """Warn on hidden dense/conv1d layers left without a non-linearity."""
    out = output_layer_index(spec)
    findings = []
    layers = spec.layers
    for i, layer in enumerate(layers):
        if not layer.has_params or i == out:
            continue
        if not _identity(layer.activation):
            continue
        nxt = layers[i + 1] if i + 1 < len(layers) else None
        if nxt is not None and nxt.kind == "activation" and not _identity(nxt.activation):
            continue
        findings.append(
            Finding(
                "missing_activation", WARNING,
                f"hidden layer {i} ({layer.kind}) has no activation function",
                {"layer_index": i, "activation": layer.activation},
                locus=f"layer {i}",
            )
        )
    return findings


def check_output_activation(spec: ModelSpec, data_interface: DataInterface,
                            config: ModelStageConfig | None = None) -> list[Finding]:
    config = config or ModelStageConfig()
    act = output_activation(spec)
    units = output_units(spec)
    task = data_interface.task_type
    if task == "regression":
        ok, expected = act == "linear", "linear"
    elif task == "multiclass_classification":
        ok, expected = act == "softmax", "softmax"
    elif config.binary_output_strictness == "strict":
        ok, expected = act == "sigmoid", "sigmoid"
    else:
        ok = act == "sigmoid" or (act == "softmax" and units == 2)
        expected = "sigmoid, or softmax over 2 units"
    if ok:
        return []
    return [
        Finding(
            "output_activation", ERROR,
            f"output activation is {act!r}; {task} expects {expected}",
            {"activation": act, "expected": expected, "layer_index": output_layer_index(spec)},
            locus="output",
        )
    ]


def check_learning_rate(spec: ModelSpec, config: ModelStageConfig | None = None) -> list[Finding]:
    config = config or ModelStageConfig()
    lr = spec.learning_rate
    if not math.isfinite(lr) or lr <= 0:
        return [Finding("learning_rate", ERROR, f"learning rate {lr} must be a positive finite number",
                        {"learning_rate": json_number(lr)})]
    if lr < config.lr_min or lr >= config.lr_max:
        return [
            Finding(
                "learning_rate", WARNING,
                f"learning rate {lr:g} is outside the common range [{config.lr_min:g}, {config.lr_max:g})",
                {"learning_rate": lr, "lr_min": config.lr_min, "lr_max": config.lr_max},
            )
        ]
    return []


def check_loss_function(spec: ModelSpec, data_interface: DataInterface) -> list[Finding]:
    expected = EXPECTED_LOSS[data_interface.task_type]
    if spec.loss_kind == expected:
        return []
    return [
        Finding(
            "loss_function", ERROR,
            f"loss {spec.loss_kind!r} does not fit {data_interface.task_type}; expected {expected!r}",
            {"loss_kind": spec.loss_kind, "expected": expected},
        )
    ]


def check_metrics(spec: ModelSpec, data_interface: DataInterface) -> list[Finding]:
    allowed = ALLOWED_METRICS[data_interface.task_type]
    wrong = [m for m in spec.metrics if m not in allowed]
    if not wrong:
        return []
    return [
        Finding(
            "metrics", ERROR,
            f"metric(s) {', '.join(wrong)} do not fit {data_interface.task_type}; use {', '.join(sorted(allowed))}",
            {"metrics": list(spec.metrics), "allowed": sorted(allowed)},
        )
    ]


# -- training dynamics -----------------------------------------------------

def sample_losses(losses, every: int) -> list[float]:
    """Loss at epochs every, 2*every, ... (an exact subsequence)."""
    return list(losses[every - 1 :: every])


def count_reversals(sampled, amplitude_fraction: float) -> int:
    """Direction changes between consecutive large deltas of a sampled trace.

    A delta counts as large when its magnitude exceeds ``amplitude_fraction``
    times the mean of the sampled trace.
    """
    if len(sampled) < 3:
        return 0
    threshold = amplitude_fraction * abs(float(np.mean(sampled)))
    deltas = np.diff(np.asarray(sampled, dtype=np.float64))
    reversals = 0
    for a, b in zip(deltas[:-1], deltas[1:]):
        if abs(a) > threshold and abs(b) > threshold and (a > 0) != (b > 0):
            reversals += 1
    return reversals


def dynamics_run(spec: ModelSpec, data_interface: DataInterface, config: ModelStageConfig,
                 run_index: int, seed: int):
    """Train the user's model once on fresh mock data; returns (findings, trace record)."""
    task = data_interface.task_type
    C = data_interface.num_classes
    data = generate_mock_data(data_interface, MockDataConfig(seed=seed, class_sep=config.class_sep))
    model = Model(spec.layers, spec.input_dim, seed=seed)
    targets = mock_targets(data, task, C, model.output_dim)
    metric = "accuracy" if is_classification(task) else "mae"
    budget = config.dynamics
    trace = train(
        model, data.features, targets,
        TrainConfig(spec.loss_kind, spec.optimizer, spec.learning_rate, budget.epochs,
                    budget.batch_size, seed, metric),
    )
    sampled = sample_losses(trace.losses, budget.sample_every)
    record = {
        "check": DYNAMICS,
        "run": run_index,
        "seed": seed,
        "metric_kind": metric,
        "losses": [json_number(v) for v in trace.losses],
        "metrics": [json_number(v) for v in trace.metrics],
        "sample_every": budget.sample_every,
    }
    bad = [k for k, v in enumerate(trace.losses, start=1) if not math.isfinite(v)]
    if bad:
        return [
            Finding(
                "nonfinite_loss", ERROR,
                f"loss became {trace.losses[bad[0] - 1]} at epoch {bad[0]} on mock data",
                {"epoch": bad[0], "loss": json_number(trace.losses[bad[0] - 1])},
            )
        ], record

    findings = []
    reversals = count_reversals(sampled, config.oscillation_amplitude_fraction)
    if reversals >= config.oscillation_reversals:
        findings.append(
            Finding(
                "oscillating_loss", ERROR,
                f"oscillating loss: {reversals} large direction reversals in the loss sampled "
                f"every {budget.sample_every} epochs; reduce learning rate",
                {"reversals": reversals, "sampled_losses": sampled},
            )
        )
    first, last = trace.losses[0], trace.losses[-1]
    reduction = (first - last) / abs(first) if first != 0 else 0.0
    slow = reduction < config.slow_convergence_fraction
    evidence = {"relative_reduction": reduction}
    if slow and is_classification(task):
        acc = evaluate(model, data.features, targets, "accuracy")
        evidence["accuracy"] = acc
        slow = acc < 1.0 / C + config.accuracy_margin
    if slow:
        findings.append(
            Finding(
                "slow_convergence", WARNING,
                f"loss fell by only {reduction:.1%} over {budget.epochs} epochs",
                evidence,
            )
        )
    if float(np.var(trace.metrics)) == 0.0:
        findings.append(
            Finding(
                "metric_flat", WARNING,
                f"model is not learning: {metric} stayed at {trace.metrics[0]:.4g} for every epoch",
                {"metric": metric, "value": trace.metrics[0]},
            )
        )
    return findings, record


def check_training_dynamics(spec: ModelSpec, data_interface: DataInterface,
                            config: ModelStageConfig | None = None):
    config = config or ModelStageConfig()
    if spec.input_dim != data_interface.num_features:
        raise ContractError(
            f"model input_dim {spec.input_dim} does not match num_features {data_interface.num_features}"
        )
    return run_repeated(
        lambda i, seed: dynamics_run(spec, data_interface, config, i, seed),
        config.runs,
        config.seed,
    )


def run_model_stage(spec: ModelSpec, data_interface: DataInterface,
                    config: ModelStageConfig | None = None) -> Report:
    """Structural checks in fixed order, then dynamics when none errored."""
    config = config or ModelStageConfig()
    checks = {
        "input_shape": lambda: check_input_shape(spec, data_interface),
        "output_shape": lambda: check_output_shape(spec, data_interface),
        "missing_activation": lambda: check_hidden_activations(spec),
        "output_activation": lambda: check_output_activation(spec, data_interface, config),
        "learning_rate": lambda: check_learning_rate(spec, config),
        "loss_function": lambda: check_loss_function(spec, data_interface),
        "metrics": lambda: check_metrics(spec, data_interface),
    }
    findings: list[Finding] = []
    timings: dict[str, float] = {}
    for name in STRUCTURAL_CHECKS:
        start = time.perf_counter()
        findings.extend(checks[name]())
        timings[name] = time.perf_counter() - start
    executed = list(STRUCTURAL_CHECKS)
    skipped = {}
    per_run: list[list[Finding]] = []
    traces: list[dict] = []
    if any(f.severity == ERROR for f in findings):
        skipped[DYNAMICS] = "gated: structural errors must be fixed first"
    else:
        start = time.perf_counter()
        kept, per_run, traces = check_training_dynamics(spec, data_interface, config)
        timings[DYNAMICS] = time.perf_counter() - start
        executed.append(DYNAMICS)
        findings.extend(kept)
    return Report(
        stage="model",
        interfaces={"data_interface": data_interface.to_dict(), "model_spec": spec.to_dict()},
        config=config.to_dict(),
        executed_checks=executed,
        findings=findings,
        skipped_checks=skipped,
        per_run_findings=per_run,
        traces=traces,
        timings=timings,
    )
