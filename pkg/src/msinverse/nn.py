"""Dense feed-forward networks in plain numpy.

Forward pass, backpropagation under mean-squared error, inverted dropout,
Adam, a seeded mini-batch training loop and a plain-text weights format.
All arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numba
import numpy as np
from scipy.special import expit

ACTIVATIONS = ("relu", "sigmoid", "identity")
WEIGHTS_FORMAT = "MSINN/1"


class TrainingDivergedError(RuntimeError):
    """Raised when the loss or a gradient stops being finite."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


def relu(x):
    return np.where(x > 0.0, x, 0.0)


def sigmoid(x):
    # expit never overflows; it underflows to exactly 0 only below about -745
    return expit(x)


def identity(x):
    return np.asarray(x, dtype=np.float64)


def _activation_grad(name: str, out: np.ndarray) -> np.ndarray:
    """Derivative of the activation, written in terms of its output."""
    if name == "relu":
        return (out > 0.0).astype(np.float64)
    if name == "sigmoid":
        return out * (1.0 - out)
    return np.ones_like(out)


@dataclass
class DenseLayer:
    in_dim: int
    out_dim: int
    weights: np.ndarray
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.shape != (self.out_dim, self.in_dim):
            raise ValueError(
                f"weights shape {self.weights.shape} != ({self.out_dim}, {self.in_dim})"
            )
        if self.biases.shape != (self.out_dim,):
            raise ValueError(f"biases shape {self.biases.shape} != ({self.out_dim},)")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ValueError("layer parameters must be finite")

    @property
    def param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim

    @classmethod
    def glorot(cls, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator):
        limit = math.sqrt(6.0 / (in_dim + out_dim))
        w = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(in_dim, out_dim, w, np.zeros(out_dim), activation)


class MlpModel:
    """A chain of dense layers with optional dropout after some of them.

    All parameters live in one flat float64 buffer (``params``); each
    layer's ``weights`` and ``biases`` are views into it, so the optimizer
    can update the whole model with a single vectorized pass.
    """

    def __init__(
        self,
        layers: Sequence[DenseLayer],
        dropout_after: Iterable[int] = (),
        dropout_rate: float = 0.1,
    ):
        layers = list(layers)
        if not layers:
            raise ValueError("a model needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k].out_dim != layers[k + 1].in_dim:
                raise ValueError(
                    f"layer {k} outputs {layers[k].out_dim} but layer {k + 1} "
                    f"expects {layers[k + 1].in_dim}"
                )
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {dropout_rate}")
        self.dropout_after = frozenset(int(i) for i in dropout_after)
        if any(i < 0 or i >= len(layers) for i in self.dropout_after):
            raise ValueError("dropout index out of range")
        self.dropout_rate = float(dropout_rate)

        self.params = np.empty(sum(layer.param_count for layer in layers))
        self.layers: list[DenseLayer] = []
        for layer, (w, b) in zip(layers, _layer_views(self.params, layers)):
            w[...] = layer.weights
            b[...] = layer.biases
            layer.weights, layer.biases = w, b
            self.layers.append(layer)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def param_count(self) -> int:
        return self.params.size

    def dims(self) -> list[int]:
        return [self.in_dim] + [layer.out_dim for layer in self.layers]

    def copy(self) -> "MlpModel":
        layers = [
            DenseLayer(l.in_dim, l.out_dim, l.weights.copy(), l.biases.copy(), l.activation)
            for l in self.layers
        ]
        return MlpModel(layers, self.dropout_after, self.dropout_rate)

    def predict(self, x) -> np.ndarray:
        out, _ = forward(self, x, training=False)
        return out

    @classmethod
    def from_dims(
        cls,
        dims: Sequence[int],
        activations: Sequence[str],
        rng: np.random.Generator,
        dropout_after: Iterable[int] = (),
        dropout_rate: float = 0.1,
    ) -> "MlpModel":
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        layers = [
            DenseLayer.glorot(dims[k], dims[k + 1], activations[k], rng)
            for k in range(len(dims) - 1)
        ]
        return cls(layers, dropout_after, dropout_rate)


def _layer_views(flat: np.ndarray, layers: Sequence[DenseLayer]):
    views = []
    offset = 0
    for layer in layers:
        n_w = layer.in_dim * layer.out_dim
        w = flat[offset : offset + n_w].reshape(layer.out_dim, layer.in_dim)
        offset += n_w
        b = flat[offset : offset + layer.out_dim]
        offset += layer.out_dim
        views.append((w, b))
    return views


def dense_forward(layer: DenseLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.in_dim:
        raise ValueError(f"input width {x.shape[-1]} != layer in_dim {layer.in_dim}")
    z = x @ layer.weights.T
    z += layer.biases
    if layer.activation == "relu":
        return np.maximum(z, 0.0, out=z)
    if layer.activation == "sigmoid":
        return expit(z, out=z)
    return z


def dropout_forward(x, rate: float, training: bool, rng: np.random.Generator | None = None):
    """Inverted dropout. Returns ``(output, mask)``; the mask already carries
    the ``1/(1-rate)`` scale so backprop multiplies by it directly."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x, dtype=np.float64)
    if not training or rate == 0.0:
        return x, np.ones_like(x)
    if rng is None:
        raise ValueError("training-mode dropout needs a random generator")
    keep = rng.random(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def mse_loss(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {actual.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    diff = pred - actual
    return float(np.mean(diff * diff))


def binary_accuracy(pred, truth) -> float:
    """Fraction of positions where ``pred`` thresholded at 0.5 equals
    ``truth``. A prediction of exactly 0.5 counts as 1."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return float(np.mean((pred >= 0.5) == (truth >= 0.5)))


@dataclass
class ForwardCache:
    """What backprop needs from a forward pass."""

    inputs: list[np.ndarray]   # input seen by each layer (after upstream dropout)
    outputs: list[np.ndarray]  # activation output of each layer (before dropout)
    masks: dict[int, np.ndarray]
    squeeze: bool


def forward(
    model: MlpModel,
    x,
    training: bool = False,
    rng: np.random.Generator | None = None,
    masks: dict[int, np.ndarray] | None = None,
):
    """Run the model on a vector or a ``(batch, in_dim)`` matrix.

    In training mode dropout masks are drawn from ``rng`` unless ``masks`` is
    given, in which case those masks are replayed exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ValueError(f"input shape {x.shape} does not fit model input width {model.in_dim}")
    inputs, outputs, used = [], [], {}
    a = x
    for k, layer in enumerate(model.layers):
        inputs.append(a)
        a = dense_forward(layer, a)
        outputs.append(a)
        if training and k in model.dropout_after:
            if masks is not None:
                mask = masks[k]
                a = a * mask
            else:
                a, mask = dropout_forward(a, model.dropout_rate, True, rng)
            used[k] = mask
    cache = ForwardCache(inputs, outputs, used, squeeze)
    return (a[0] if squeeze else a), cache


@dataclass
class Gradients:
    flat: np.ndarray
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)


def backward(
    model: MlpModel, cache: ForwardCache | None, target, out: np.ndarray | None = None
) -> Gradients:
    """Gradients of the mean-squared error (mean over every output entry of
    the batch) with respect to all parameters.

    ``out`` may supply a reusable flat buffer of ``model.param_count`` floats.
    """
    if cache is None or not isinstance(cache, ForwardCache):
        raise ValueError("backward needs the cache returned by forward()")
    if len(cache.outputs) != len(model.layers):
        raise ValueError("forward cache does not belong to this model")
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 1:
        target = target[None, :]
    last = len(model.layers) - 1
    pred = cache.outputs[last]
    if last in cache.masks:
        pred = pred * cache.masks[last]
    if target.shape != pred.shape:
        raise ValueError(f"target shape {target.shape} != prediction shape {pred.shape}")

    flat = np.empty_like(model.params) if out is None else out
    if flat.shape != model.params.shape:
        raise ValueError("gradient buffer does not match the parameter count")
    views = _layer_views(flat, model.layers)
    grad = (2.0 / pred.size) * (pred - target)
    for k in range(last, -1, -1):
        layer = model.layers[k]
        if k in cache.masks:
            grad = grad * cache.masks[k]
        delta = grad * _activation_grad(layer.activation, cache.outputs[k])
        g_w, g_b = views[k]
        np.dot(delta.T, cache.inputs[k], out=g_w)
        np.sum(delta, axis=0, out=g_b)
        if k > 0:
            grad = delta @ layer.weights
    return Gradients(flat, [v[0] for v in views], [v[1] for v in views])


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, **kw) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), **kw)


_TINY = np.finfo(np.float64).tiny


@numba.njit(cache=True, fastmath=True)
def _adam_kernel(p, g, m, v, step_size, b1, b2, inv_c2, eps):
    for i in range(p.size):
        gi = g[i]
        mi = b1 * m[i] + (1.0 - b1) * gi
        vi = b2 * v[i] + (1.0 - b2) * gi * gi
        # moments of dead units decay geometrically; subnormals cost ~10x per op
        if abs(mi) < _TINY:
            mi = 0.0
        if vi < _TINY:
            vi = 0.0
        m[i] = mi
        v[i] = vi
        p[i] -= step_size * mi / (np.sqrt(vi * inv_c2) + eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied in place.

    Returns ``(params, state)`` for convenience.
    """
    if not (params.shape == grads.shape == state.first_moment.shape == state.second_moment.shape):
        raise ValueError("params, grads and moments must share one shape")
    if not math.isfinite(float(np.dot(grads, grads))):
        raise TrainingDivergedError(f"non-finite gradient at Adam step {state.step_count + 1}")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    _adam_kernel(
        params, grads, state.first_moment, state.second_moment,
        lr / c1, state.beta1, state.beta2, 1.0 / c2, state.epsilon,
    )
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 30
    learning_rate: float = 0.001
    epochs: int = 3000
    rng_seed: int = 0
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    val_loss: float | None = None
    val_accuracy: float | None = None


def train(
    model: MlpModel,
    x,
    y,
    config: TrainConfig,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    on_epoch: Callable[[EpochStats], None] | None = None,
) -> tuple[MlpModel, list[EpochStats]]:
    """Mini-batch Adam on MSE. Mutates and returns ``model``.

    Training loss and accuracy are accumulated over the epoch's batches (as
    seen with dropout active); validation metrics use inference mode.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or len(x) != len(y):
        raise ValueError("x and y must be 2-D with matching row counts")
    n = len(x)
    if n == 0:
        raise ValueError("empty training set")
    if x.shape[1] != model.in_dim or y.shape[1] != model.out_dim:
        raise ValueError("data widths do not match the model")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds training-set size {n}")

    model.dropout_rate = config.dropout_rate
    rng = np.random.default_rng(config.rng_seed)
    state = AdamState.zeros_like(model.params)
    grad_buf = np.empty_like(model.params)
    history: list[EpochStats] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        sq_err = 0.0
        hits = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            pred, cache = forward(model, xb, training=True, rng=rng)
            diff = pred - yb
            sq_err += float(np.sum(diff * diff))
            hits += int(np.count_nonzero((pred >= 0.5) == (yb >= 0.5)))
            grads = backward(model, cache, yb, out=grad_buf)
            try:
                adam_step(model.params, grads.flat, state, config.learning_rate)
            except TrainingDivergedError as exc:
                raise TrainingDivergedError(f"{exc} (epoch {epoch})", epoch) from None
        loss = sq_err / y.size
        if not math.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss} at epoch {epoch}", epoch)
        stats = EpochStats(epoch, loss, hits / y.size)
        if validation is not None:
            vp = model.predict(validation[0])
            stats.val_loss = mse_loss(vp, validation[1])
            stats.val_accuracy = binary_accuracy(vp, validation[1])
        history.append(stats)
        if on_epoch is not None:
            on_epoch(stats)
    return model, history


def _fmt(values: Iterable[float]) -> str:
    return " ".join(f"{v:.17g}" for v in values)


def save_weights(model: MlpModel, path) -> None:
    lines = [
        WEIGHTS_FORMAT,
        f"dropout_rate {model.dropout_rate:.17g}",
        "dropout_after " + " ".join(str(i) for i in sorted(model.dropout_after)),
        f"layers {len(model.layers)}",
    ]
    for k, layer in enumerate(model.layers):
        lines.append(f"layer {k} {layer.in_dim} {layer.out_dim} {layer.activation}")
        lines.extend(_fmt(row) for row in layer.weights)
        lines.append(_fmt(layer.biases))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_weights(path) -> MlpModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != WEIGHTS_FORMAT:
        raise ValueError(f"{path}: not an {WEIGHTS_FORMAT} weights file")
    try:
        it = iter(lines[1:])

        def field_line(name):
            parts = next(it).split()
            if not parts or parts[0] != name:
                raise ValueError(f"expected {name!r} line")
            return parts[1:]

        rate = float(field_line("dropout_rate")[0])
        dropout_after = [int(t) for t in field_line("dropout_after")]
        n_layers = int(field_line("layers")[0])
        layers = []
        for k in range(n_layers):
            idx, in_dim, out_dim, act = field_line("layer")
            if int(idx) != k:
                raise ValueError(f"layer index {idx} out of order")
            in_dim, out_dim = int(in_dim), int(out_dim)
            w = np.array([[float(t) for t in next(it).split()] for _ in range(out_dim)])
            b = np.array([float(t) for t in next(it).split()])
            layers.append(DenseLayer(in_dim, out_dim, w.reshape(out_dim, in_dim), b, act))
    except (StopIteration, IndexError) as exc:
        raise ValueError(f"{path}: truncated weights file") from exc
    return MlpModel(layers, dropout_after, rate)
