"""
Small deterministic neural-network runtime.

Supports dense and valid-padding 1-D convolution layers, backpropagation,
SGD and Adam, the three losses and two metrics used by the mock models, and
a central finite-difference gradient oracle.  All arithmetic is float64.
Non-finite values are propagated, never masked: a NaN loss is a diagnostic
signal for the checks built on top of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError

LAYER_KINDS = ("dense", "conv1d", "flatten", "activation")
ACTIVATIONS = ("linear", "relu", "sigmoid", "tanh", "softmax", "none")
LOSSES = ("mse", "binary_crossentropy", "categorical_crossentropy")
OPTIMIZERS = ("sgd", "adam")
METRICS = ("mae", "accuracy")

# Keras' default fuzz factor; probabilities are clamped to [EPS, 1 - EPS].
EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass(frozen=True)
class LayerDef:
    """Declarative description of one layer.

    ``units`` is required for dense layers, ``filters`` and ``kernel_size``
    for conv1d layers.  ``activation`` is applied after the affine part of
    dense/conv1d layers and is the whole behaviour of an ``activation``
    layer.  Flatten layers carry no other field.
    """

    kind: str
    units: int | None = None
    filters: int | None = None
    kernel_size: int | None = None
    activation: str = "none"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ContractError(
                f"unknown layer kind {self.kind!r}; expected one of {', '.join(LAYER_KINDS)}"
            )
        if self.activation not in ACTIVATIONS:
            raise ContractError(
                f"unknown activation {self.activation!r}; expected one of {', '.join(ACTIVATIONS)}"
            )
        present = {
            "units": self.units is not None,
            "filters": self.filters is not None,
            "kernel_size": self.kernel_size is not None,
        }
        required = {
            "dense": {"units"},
            "conv1d": {"filters", "kernel_size"},
            "flatten": set(),
            "activation": set(),
        }[self.kind]
        for name, is_set in present.items():
            if name in required and not is_set:
                raise ContractError(f"{self.kind} layer requires {name!r}")
            if name not in required and is_set:
                raise ContractError(f"{self.kind} layer does not accept {name!r}")
            if is_set:
                value = getattr(self, name)
                if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                    raise ContractError(f"{name} must be a positive integer, got {value!r}")
        if self.kind == "flatten" and self.activation != "none":
            raise ContractError("flatten layer does not accept an activation")
        if self.kind == "activation" and self.activation == "none":
            raise ContractError("activation layer requires an activation")

    @property
    def has_params(self) -> bool:
        return self.kind in ("dense", "conv1d")


def validate_layer_list(layers: Sequence[LayerDef]) -> None:
    """Check list-level invariants that do not depend on shapes."""
    if not layers:
        raise ContractError("a model needs at least one layer")
    for i, layer in enumerate(layers):
        if layer.activation == "softmax" and i != len(layers) - 1:
            raise ContractError(
                f"softmax is only allowed as the final activation (found on layer {i})"
            )


def infer_shapes(input_dim: int, layers: Sequence[LayerDef]) -> list[tuple[int, ...]]:
    """Return the per-sample output shape of every layer.

    A 2-D input ``(batch, input_dim)`` entering a conv1d layer is read as a
    single-channel sequence of length ``input_dim``.  Raises ShapeError
    naming the offending layer when shapes do not compose.
    """
    if isinstance(input_dim, bool) or not isinstance(input_dim, int) or input_dim < 1:
        raise ShapeError(f"input_dim must be a positive integer, got {input_dim!r}")
    shape: tuple[int, ...] = (input_dim,)
    shapes = []
    for i, layer in enumerate(layers):
        if layer.kind == "dense":
            if len(shape) != 1:
                raise ShapeError(
                    f"layer {i} (dense) expects a flat input but receives shape {shape}; "
                    "insert a flatten layer"
                )
            shape = (layer.units,)
        elif layer.kind == "conv1d":
            length = shape[0]
            if length < layer.kernel_size:
                raise ShapeError(
                    f"layer {i} (conv1d) kernel_size {layer.kernel_size} exceeds "
                    f"sequence length {length}"
                )
            shape = (length - layer.kernel_size + 1, layer.filters)
        elif layer.kind == "flatten":
            shape = (int(np.prod(shape)),)
        shapes.append(shape)
    return shapes


def _in_channels(shape: tuple[int, ...]) -> int:
    return shape[1] if len(shape) == 2 else 1


class Model:
    """A feed-forward network: layer definitions plus float64 parameters.

    ``params`` is a flat list holding ``W, b`` for each dense/conv1d layer in
    order.  Dense weights have shape ``(fan_in, units)``; conv1d weights have
    shape ``(kernel_size, in_channels, filters)``.
    """

    def __init__(self, layers: Sequence[LayerDef], input_dim: int, seed: int = 0):
        layers = list(layers)
        validate_layer_list(layers)
        self.layers = layers
        self.input_dim = input_dim
        self.shapes = infer_shapes(input_dim, layers)
        self.seed = seed
        self.params: list[np.ndarray] = []
        self._param_index: list[int | None] = []
        rng = np.random.default_rng(seed)
        in_shape: tuple[int, ...] = (input_dim,)
        for layer, out_shape in zip(layers, self.shapes):
            if layer.kind == "dense":
                w_shape = (in_shape[0], layer.units)
                fan_in, fan_out = in_shape[0], layer.units
            elif layer.kind == "conv1d":
                channels = _in_channels(in_shape)
                w_shape = (layer.kernel_size, channels, layer.filters)
                fan_in = layer.kernel_size * channels
                fan_out = layer.kernel_size * layer.filters
            else:
                self._param_index.append(None)
                in_shape = out_shape
                continue
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            self._param_index.append(len(self.params))
            self.params.append(rng.uniform(-limit, limit, size=w_shape))
            self.params.append(np.zeros(w_shape[-1]))
            in_shape = out_shape

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.shapes[-1]

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.output_shape))

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params))

    def copy(self) -> "Model":
        clone = object.__new__(Model)
        clone.layers = list(self.layers)
        clone.input_dim = self.input_dim
        clone.shapes = list(self.shapes)
        clone.seed = self.seed
        clone.params = [p.copy() for p in self.params]
        clone._param_index = list(self._param_index)
        return clone

    def __repr__(self):
        kinds = ", ".join(layer.kind for layer in self.layers)
        return f"Model(input_dim={self.input_dim}, layers=[{kinds}], params={self.parameter_count()})"


# -- activations -----------------------------------------------------------

def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name in ("linear", "none"):
        return z
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if name == "tanh":
        return np.tanh(z)
    if name == "softmax":
        shifted = z - np.max(z, axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=-1, keepdims=True)
    raise ContractError(f"unknown activation {name!r}")


def _activation_backward(name: str, z: np.ndarray, a: np.ndarray, da: np.ndarray) -> np.ndarray:
    if name in ("linear", "none"):
        return da
    if name == "relu":
        return da * (z > 0)
    if name == "sigmoid":
        return da * a * (1.0 - a)
    if name == "tanh":
        return da * (1.0 - a * a)
    if name == "softmax":
        return a * (da - np.sum(da * a, axis=-1, keepdims=True))
    raise ContractError(f"unknown activation {name!r}")


# -- forward / backward ----------------------------------------------------

def _check_inputs(model: Model, inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        got = x.shape[1] if x.ndim == 2 else x.shape
        raise ShapeError(
            f"input has {got} features per row but the model expects input_dim {model.input_dim}"
        )
    return x


def _forward(model: Model, x: np.ndarray):
    caches = []
    for layer, pidx in zip(model.layers, model._param_index):
        if layer.kind == "dense":
            W, b = model.params[pidx], model.params[pidx + 1]
            z = x @ W + b
            a = _activate(layer.activation, z)
            caches.append((x, z, a))
        elif layer.kind == "conv1d":
            if x.ndim == 2:
                x = x[:, :, None]
            W, b = model.params[pidx], model.params[pidx + 1]
            k, channels, filters = W.shape
            windows = np.lib.stride_tricks.sliding_window_view(x, k, axis=1)
            # (batch, out_len, channels, k) -> (batch, out_len, k * channels)
            cols = windows.transpose(0, 1, 3, 2).reshape(x.shape[0], -1, k * channels)
            z = cols @ W.reshape(k * channels, filters) + b
            a = _activate(layer.activation, z)
            caches.append((x, cols, z, a))
        elif layer.kind == "flatten":
            caches.append(x.shape)
            a = x.reshape(x.shape[0], -1)
        else:
            z = x
            a = _activate(layer.activation, z)
            caches.append((z, a))
        x = a
    return x, caches


def _backward(model: Model, caches, dout: np.ndarray) -> list[np.ndarray]:
    grads: list[np.ndarray | None] = [None] * len(model.params)
    d = dout
    for layer, pidx, cache in reversed(list(zip(model.layers, model._param_index, caches))):
        if layer.kind == "dense":
            x, z, a = cache
            dz = _activation_backward(layer.activation, z, a, d)
            grads[pidx] = x.T @ dz
            grads[pidx + 1] = dz.sum(axis=0)
            d = dz @ model.params[pidx].T
        elif layer.kind == "conv1d":
            x, cols, z, a = cache
            W = model.params[pidx]
            k, channels, filters = W.shape
            dz = _activation_backward(layer.activation, z, a, d)
            grads[pidx] = np.einsum("blc,blf->cf", cols, dz).reshape(W.shape)
            grads[pidx + 1] = dz.sum(axis=(0, 1))
            dcols = (dz @ W.reshape(k * channels, filters).T).reshape(
                x.shape[0], -1, k, channels
            )
            dx = np.zeros_like(x)
            out_len = dcols.shape[1]
            for j in range(k):
                dx[:, j : j + out_len, :] += dcols[:, :, j, :]
            d = dx
        elif layer.kind == "flatten":
            d = d.reshape(cache)
        else:
            z, a = cache
            d = _activation_backward(layer.activation, z, a, d)
    return grads


def forward(model: Model, inputs) -> np.ndarray:
    """Run inference on a ``(batch, input_dim)`` array."""
    x = _check_inputs(model, inputs)
    with np.errstate(all="ignore"):
        out, _ = _forward(model, x)
    return out


# -- losses ----------------------------------------------------------------

def _check_loss_args(loss_kind: str, predictions, targets):
    if loss_kind not in LOSSES:
        raise ContractError(f"unknown loss {loss_kind!r}; expected one of {', '.join(LOSSES)}")
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"predictions shape {p.shape} does not match targets shape {t.shape}")
    return p, t


def _loss_and_grad(loss_kind: str, p: np.ndarray, t: np.ndarray, need_grad: bool):
    n = p.shape[0]
    if loss_kind == "mse":
        diff = p - t
        loss = np.mean(diff * diff)
        grad = 2.0 * diff / diff.size if need_grad else None
        return loss, grad
    clipped = np.clip(p, EPS, 1.0 - EPS)
    inside = (p >= EPS) & (p <= 1.0 - EPS)
    if loss_kind == "binary_crossentropy":
        terms = -(t * np.log(clipped) + (1.0 - t) * np.log(1.0 - clipped))
        loss = np.mean(terms)
        grad = None
        if need_grad:
            grad = (-t / clipped + (1.0 - t) / (1.0 - clipped)) / p.size * inside
        return loss, grad
    # categorical: sum over classes, mean over the remaining axes
    per_row = -np.sum(t * np.log(clipped), axis=-1)
    loss = np.mean(per_row)
    grad = None
    if need_grad:
        grad = (-t / clipped) / per_row.size * inside
    return loss, grad


def compute_loss(loss_kind: str, predictions, targets) -> float:
    """Mean loss over the batch.  Cross-entropies clamp probabilities to
    ``[1e-7, 1 - 1e-7]``; the clamp contributes a zero gradient."""
    p, t = _check_loss_args(loss_kind, predictions, targets)
    with np.errstate(all="ignore"):
        loss, _ = _loss_and_grad(loss_kind, p, t, need_grad=False)
    return float(loss)


def _loss_of(model: Model, x: np.ndarray, t: np.ndarray, loss_kind: str) -> float:
    out, _ = _forward(model, x)
    if out.shape != t.shape:
        raise ShapeError(f"model output shape {out.shape} does not match targets shape {t.shape}")
    loss, _ = _loss_and_grad(loss_kind, out, t, need_grad=False)
    return float(loss)


def _loss_and_gradients(model: Model, x: np.ndarray, t: np.ndarray, loss_kind: str):
    out, caches = _forward(model, x)
    if out.shape != t.shape:
        raise ShapeError(f"model output shape {out.shape} does not match targets shape {t.shape}")
    loss, dout = _loss_and_grad(loss_kind, out, t, need_grad=True)
    return float(loss), out, _backward(model, caches, dout)


def _prepare_batch(model: Model, inputs, targets, loss_kind: str):
    if loss_kind not in LOSSES:
        raise ContractError(f"unknown loss {loss_kind!r}; expected one of {', '.join(LOSSES)}")
    x = _check_inputs(model, inputs)
    t = np.asarray(targets, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    if t.shape[0] != x.shape[0]:
        raise ShapeError(f"{x.shape[0]} input rows but {t.shape[0]} target rows")
    return x, t


def gradients(model: Model, inputs, targets, loss_kind: str) -> list[np.ndarray]:
    """Analytic gradient of the mean batch loss, one array per parameter."""
    x, t = _prepare_batch(model, inputs, targets, loss_kind)
    with np.errstate(all="ignore"):
        _, _, grads = _loss_and_gradients(model, x, t, loss_kind)
    return grads


def central_difference(func: Callable[[np.ndarray], float], x: np.ndarray, epsilon: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    if not epsilon > 0:
        raise ContractError(f"epsilon must be positive, got {epsilon!r}")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + epsilon
        f_plus = func(x)
        flat[j] = orig - epsilon
        f_minus = func(x)
        flat[j] = orig
        gflat[j] = (f_plus - f_minus) / (2.0 * epsilon)
    return grad


def finite_diff_gradients(model: Model, inputs, targets, loss_kind: str, epsilon: float = 1e-5) -> list[np.ndarray]:
    """Central finite-difference estimate of every parameter gradient.

    Independent of the backward pass: only forward evaluations are used.
    The model is left unchanged.
    """
    if not epsilon > 0:
        raise ContractError(f"epsilon must be positive, got {epsilon!r}")
    x, t = _prepare_batch(model, inputs, targets, loss_kind)
    probe = model.copy()
    result = []
    with np.errstate(all="ignore"):
        for i, original in enumerate(model.params):
            def loss_at(value, i=i):
                probe.params[i] = value
                return _loss_of(probe, x, t, loss_kind)

            result.append(central_difference(loss_at, original, epsilon))
            probe.params[i] = original.copy()
    return result


# -- training --------------------------------------------------------------

def default_metric(loss_kind: str) -> str:
    return "mae" if loss_kind == "mse" else "accuracy"


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "mse"
    optimizer: str = "adam"
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    metric_kind: str | None = None

    def __post_init__(self):
        if self.loss_kind not in LOSSES:
            raise ContractError(f"unknown loss {self.loss_kind!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ContractError(f"unknown optimizer {self.optimizer!r}")
        if self.metric_kind is not None and self.metric_kind not in METRICS:
            raise ContractError(f"unknown metric {self.metric_kind!r}")
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ContractError("seed must be an unsigned 64-bit integer")

    @property
    def metric(self) -> str:
        return self.metric_kind or default_metric(self.loss_kind)


@dataclass
class TrainTrace:
    """Per-epoch history of one training run.

    ``losses[k]`` and ``metrics[k]`` are sample-weighted means over the
    mini-batches of epoch ``k + 1``, measured before each update.
    ``initial_loss`` is the full-data loss of the untrained model.
    """

    losses: list[float]
    metrics: list[float]
    metric_kind: str
    initial_loss: float
    parameters: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.losses)


class _Adam:
    def __init__(self, params):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        c1 = 1.0 - ADAM_BETA1**self.t
        c2 = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPSILON)


class _SGD:
    def __init__(self, params):
        pass

    def step(self, params, grads, lr):
        for p, g in zip(params, grads):
            p -= lr * g


def _metric_value(metric_kind: str, predictions: np.ndarray, targets: np.ndarray) -> float:
    if metric_kind == "mae":
        return float(np.mean(np.abs(predictions - targets)))
    if predictions.shape[-1] == 1:
        hits = (predictions[:, 0] >= 0.5) == (targets[:, 0] >= 0.5)
    else:
        hits = np.argmax(predictions, axis=-1) == np.argmax(targets, axis=-1)
    return float(np.mean(hits))


def train(model: Model, features, targets, config: TrainConfig) -> TrainTrace:
    """Train ``model`` in place with mini-batch gradient descent.

    Shuffling derives from ``config.seed``.  Numerical blow-up is recorded
    in the trace and training carries on; the caller decides what it means.
    """
    x, t = _prepare_batch(model, features, targets, config.loss_kind)
    if model.output_shape != t.shape[1:]:
        raise ShapeError(
            f"model output shape {model.output_shape} does not match target shape {t.shape[1:]}"
        )
    metric_kind = config.metric
    n = x.shape[0]
    rng = np.random.default_rng(config.seed)
    opt = (_Adam if config.optimizer == "adam" else _SGD)(model.params)
    losses: list[float] = []
    metrics: list[float] = []
    with np.errstate(all="ignore"):
        initial_loss = _loss_of(model, x, t, config.loss_kind)
        for _ in range(config.epochs):
            order = rng.permutation(n)
            loss_sum = 0.0
            metric_sum = 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start : start + config.batch_size]
                xb, tb = x[idx], t[idx]
                loss, out, grads = _loss_and_gradients(model, xb, tb, config.loss_kind)
                loss_sum += loss * len(idx)
                metric_sum += _metric_value(metric_kind, out, tb) * len(idx)
                opt.step(model.params, grads, config.learning_rate)
            losses.append(loss_sum / n)
            metrics.append(metric_sum / n)
    return TrainTrace(
        losses=losses,
        metrics=metrics,
        metric_kind=metric_kind,
        initial_loss=initial_loss,
        parameters=[p.copy() for p in model.params],
    )


def evaluate(model: Model, features, targets, metric_kind: str) -> float:
    """Score the model on a full dataset.

    Accuracy uses a 0.5 threshold for a single output unit and argmax
    otherwise; integer class ids are accepted as targets for the argmax case.
    """
    if metric_kind not in METRICS:
        raise ContractError(f"unknown metric {metric_kind!r}")
    preds = forward(model, features)
    t = np.asarray(targets, dtype=np.float64)
    if preds.ndim != 2:
        raise ShapeError(f"metrics need a flat model output, got shape {preds.shape[1:]}")
    if t.ndim == 1:
        if metric_kind == "accuracy" and preds.shape[1] > 1:
            labels = t.astype(np.int64)
            if np.any(labels < 0) or np.any(labels >= preds.shape[1]):
                raise ContractError(
                    f"class ids must lie in [0, {preds.shape[1]}) for a {preds.shape[1]}-unit output"
                )
            with np.errstate(all="ignore"):
                return float(np.mean(np.argmax(preds, axis=1) == labels))
        t = t[:, None]
    if t.shape != preds.shape:
        raise ContractError(
            f"{metric_kind} is incompatible with output shape {preds.shape[1:]} "
            f"and target shape {t.shape[1:]}"
        )
    with np.errstate(all="ignore"):
        return _metric_value(metric_kind, preds, t)


def mean_max_probability(model: Model, features) -> float:
    """Average confidence of the model's top output (``max(p, 1-p)`` for one unit)."""
    preds = forward(model, features)
    if preds.shape[1] == 1:
        conf = np.maximum(preds[:, 0], 1.0 - preds[:, 0])
    else:
        conf = np.max(preds, axis=1)
    return float(np.mean(conf))
