"""
Dense network math: parameter containers, perceptron and vanilla RNN forward
passes, output heads and losses.

All arrays are float64. Parameter matrices follow the row-vector convention:
a layer maps ``x @ W + b`` with ``W`` of shape (fan_in, fan_out) and ``b`` a
1 x fan_out matrix. Everything here is pure: parameter arrays are read-only
and every "update" builds a new `NetworkState`.
"""
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .enums import Head, ParamRole
from .errors import (
    NonFiniteError,
    ProbabilityRangeError,
    ShapeMismatchError,
)
from .util import params_checksum

BCE_PROBABILITY_FLOOR = 1e-12
"Probabilities are clamped to this floor before taking their logarithm"


class ParamMatrix:
    "One layer's dense weights, the unit of perturbation and update"

    __slots__ = ("name", "role", "data")

    def __init__(self, data, name="", role=ParamRole.WEIGHT):
        data = np.array(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        elif data.ndim == 1:
            data = data.reshape(1, -1)
        elif data.ndim != 2:
            raise ShapeMismatchError(f"parameter {name!r}", None, data.shape)
        if not np.isfinite(data).all():
            raise NonFiniteError(f"parameters of {name or 'matrix'}")
        data.flags.writeable = False
        self.name = name
        self.role = ParamRole.coerce(role)
        self.data = data

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def replace(self, data):
        "Same name and role, new values"
        return ParamMatrix(data, name=self.name, role=self.role)

    def __repr__(self):
        return f"ParamMatrix({self.name!r}, {self.role.value}, {self.rows}x{self.cols})"


class LayoutEntry(NamedTuple):
    name: str
    role: ParamRole
    shape: Tuple[int, int]


@dataclass(frozen=True)
class MlpSpec:
    """
    A fully connected perceptron: ReLU hidden layers and a configurable head.

    `use_bias` is either one flag for every layer ("affine" when true, "linear"
    when false) or one flag per layer.
    """

    layer_dims: Tuple[int, ...] = (2, 4, 2)
    use_bias: Union[bool, Tuple[bool, ...]] = True
    hidden_nonlinearity: str = "relu"
    head: Head = Head.SIGMOID_SOFTMAX

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 3:
            raise ShapeMismatchError("layer_dims (need at least one hidden layer)", None, dims)
        if any(d < 1 for d in dims):
            raise ShapeMismatchError("layer_dims", None, dims)
        n_layers = len(dims) - 1
        if isinstance(self.use_bias, (bool, np.bool_)):
            use_bias = (bool(self.use_bias),) * n_layers
        else:
            use_bias = tuple(bool(flag) for flag in self.use_bias)
            if len(use_bias) != n_layers:
                raise ShapeMismatchError("use_bias flags", (n_layers,), (len(use_bias),))
        if self.hidden_nonlinearity != "relu":
            raise ValueError(f"Unsupported hidden nonlinearity: {self.hidden_nonlinearity}")
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "use_bias", use_bias)
        object.__setattr__(self, "head", Head.coerce(self.head))

    @property
    def n_layers(self):
        return len(self.layer_dims) - 1

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def layout(self):
        entries = []
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_dims, self.layer_dims[1:])):
            entries.append(LayoutEntry(f"w{i}", ParamRole.WEIGHT, (fan_in, fan_out)))
            if self.use_bias[i]:
                entries.append(LayoutEntry(f"b{i}", ParamRole.BIAS, (1, fan_out)))
        return entries


@dataclass(frozen=True)
class RnnSpec:
    "A single-layer vanilla ReLU RNN with a per-step affine readout"

    input_dim: int = 3
    hidden_dim: int = 512
    output_dim: int = 3
    use_bias: bool = True
    nonlinearity: str = "relu"

    def __post_init__(self):
        for name in ("input_dim", "hidden_dim", "output_dim"):
            if int(getattr(self, name)) < 1:
                raise ShapeMismatchError(name, None, (getattr(self, name),))
        if self.nonlinearity != "relu":
            raise ValueError(f"Unsupported nonlinearity: {self.nonlinearity}")

    def layout(self):
        hidden = self.hidden_dim
        entries = [
            LayoutEntry("w_in", ParamRole.WEIGHT, (self.input_dim, hidden)),
            LayoutEntry("w_rec", ParamRole.RECURRENT, (hidden, hidden)),
        ]
        if self.use_bias:
            entries.append(LayoutEntry("b_h", ParamRole.BIAS, (1, hidden)))
        entries.append(LayoutEntry("w_out", ParamRole.WEIGHT, (hidden, self.output_dim)))
        if self.use_bias:
            entries.append(LayoutEntry("b_out", ParamRole.BIAS, (1, self.output_dim)))
        return entries


@dataclass(frozen=True)
class ParamSpec:
    "Free-standing parameter matrices, for objectives that are not networks"

    shapes: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "shapes", tuple((int(r), int(c)) for r, c in self.shapes)
        )

    def layout(self):
        return [
            LayoutEntry(f"p{i}", ParamRole.WEIGHT, shape)
            for i, shape in enumerate(self.shapes)
        ]


NetworkSpec = Union[MlpSpec, RnnSpec, ParamSpec]


@dataclass(frozen=True)
class NetworkState:
    "An architecture and its current parameter matrices, in layout order"

    spec: NetworkSpec
    params: Tuple[ParamMatrix, ...]

    def __post_init__(self):
        params = tuple(self.params)
        layout = self.spec.layout()
        if len(params) != len(layout):
            raise ShapeMismatchError(
                "parameter list", (len(layout),), (len(params),)
            )
        for entry, param in zip(layout, params):
            if param.shape != entry.shape:
                raise ShapeMismatchError(f"parameter {entry.name!r}", entry.shape, param.shape)
            if param.role != entry.role:
                raise ValueError(
                    f"Parameter {entry.name!r} must be tagged {entry.role.value}, not {param.role.value}"
                )
        object.__setattr__(self, "params", params)

    @classmethod
    def from_arrays(cls, spec, arrays):
        "Wrap raw arrays, naming and tagging them from the spec layout"
        layout = spec.layout()
        if len(arrays) != len(layout):
            raise ShapeMismatchError("parameter list", (len(layout),), (len(arrays),))
        return cls(
            spec,
            tuple(
                ParamMatrix(array, name=entry.name, role=entry.role)
                for entry, array in zip(layout, arrays)
            ),
        )

    @property
    def arrays(self):
        return tuple(p.data for p in self.params)

    @property
    def parameter_count(self):
        return sum(p.size for p in self.params)

    @property
    def recurrent_index(self):
        for i, param in enumerate(self.params):
            if param.role == ParamRole.RECURRENT:
                return i
        return None

    def param(self, name):
        for param in self.params:
            if param.name == name:
                return param
        raise KeyError(name)

    def with_arrays(self, arrays):
        if len(arrays) != len(self.params):
            raise ShapeMismatchError("parameter list", (len(self.params),), (len(arrays),))
        return NetworkState(
            self.spec, tuple(p.replace(a) for p, a in zip(self.params, arrays))
        )

    def shifted(self, deltas, scale=1.0):
        "Parameters moved by `scale * deltas`, the receiver is left untouched"
        return self.with_arrays(
            [p.data + scale * d for p, d in zip(self.params, deltas)]
        )

    def checksum(self):
        return params_checksum(self.arrays)


@dataclass(frozen=True)
class Batch:
    """
    Inputs and targets for one loss evaluation.

    Feed-forward batches hold `inputs` of shape (samples, features) and
    `targets` holding class labels (or regression values). Sequence batches
    hold `inputs` of shape (samples, T, features), the next-step `targets`
    of shape (samples, outputs) and `step_targets` of shape
    (samples, T, outputs), the value following every step of the window.
    """

    inputs: np.ndarray
    targets: np.ndarray
    step_targets: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        targets = np.asarray(self.targets)
        if targets.dtype.kind == "f" or inputs.ndim == 3:
            targets = targets.astype(np.float64)
        if inputs.ndim not in (2, 3):
            raise ShapeMismatchError("batch inputs", None, inputs.shape)
        if targets.shape[0] != inputs.shape[0]:
            raise ShapeMismatchError("batch targets", (inputs.shape[0],), targets.shape[:1])
        step_targets = self.step_targets
        if step_targets is not None:
            step_targets = np.asarray(step_targets, dtype=np.float64)
            if inputs.ndim != 3 or step_targets.shape[:2] != inputs.shape[:2]:
                raise ShapeMismatchError("step targets", inputs.shape[:2], step_targets.shape[:2])
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "step_targets", step_targets)

    @property
    def n_samples(self):
        return self.inputs.shape[0]

    @property
    def is_sequence(self):
        return self.inputs.ndim == 3

    @property
    def lookback(self):
        return self.inputs.shape[1] if self.is_sequence else None

    def subset(self, indices):
        return Batch(
            self.inputs[indices],
            self.targets[indices],
            None if self.step_targets is None else self.step_targets[indices],
        )


class RnnOutput(NamedTuple):
    predictions: np.ndarray
    "(samples, T, outputs) per-step readouts"
    final_hidden: np.ndarray
    "(samples, hidden) state after the last step"
    history: Optional[np.ndarray] = None
    "(samples, T, hidden) hidden states, only when requested"


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def softmax(logits, axis=-1):
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


def sigmoid_softmax_head(logits, n_classes=None):
    """
    Elementwise sigmoid followed by a softmax over the last axis.

    Args:
        logits (array): finite logits, shape (..., n_classes).
        n_classes (int): optional expected size of the last axis.
    Returns:
        array: probabilities summing to 1 over the last axis.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if n_classes is not None and logits.shape[-1] != n_classes:
        raise ShapeMismatchError("logits", (n_classes,), logits.shape[-1:])
    return softmax(expit(logits))


def apply_head(head, logits):
    head = Head.coerce(head)
    if head == Head.SIGMOID_SOFTMAX:
        return sigmoid_softmax_head(logits)
    if head == Head.SOFTMAX:
        return softmax(logits)
    return np.asarray(logits, dtype=np.float64)


def _inputs_of(batch):
    if isinstance(batch, Batch):
        return batch.inputs
    return np.asarray(batch, dtype=np.float64)


def mlp_layers(net: NetworkState) -> Iterator[Tuple[np.ndarray, Optional[np.ndarray]]]:
    "Yields (weights, bias or None) for every layer of a perceptron"
    params = iter(net.params)
    for has_bias in net.spec.use_bias:
        weights = next(params).data
        bias = next(params).data if has_bias else None
        yield weights, bias


def mlp_logits(net: NetworkState, inputs):
    "Output-layer pre-activations of a perceptron"
    if not isinstance(net.spec, MlpSpec):
        raise TypeError("mlp_logits() requires a perceptron NetworkState")
    h = np.asarray(inputs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != net.spec.input_dim:
        raise ShapeMismatchError("perceptron inputs", (None, net.spec.input_dim), h.shape)
    layers = list(mlp_layers(net))
    for i, (weights, bias) in enumerate(layers):
        h = h @ weights
        if bias is not None:
            h = h + bias
        if i < len(layers) - 1:
            h = relu(h)
    return h


def mlp_forward(net: NetworkState, batch):
    """
    Perceptron forward pass.

    Returns:
        array: (samples, outputs) head outputs, i.e. probabilities for the
        sigmoid-softmax and softmax heads.
    """
    return apply_head(net.spec.head, mlp_logits(net, _inputs_of(batch)))


def rnn_params(net: NetworkState):
    "(w_in, w_rec, b_h, w_out, b_out) with missing biases as None"
    if not isinstance(net.spec, RnnSpec):
        raise TypeError("rnn_forward() requires a recurrent NetworkState")
    arrays = {p.name: p.data for p in net.params}
    return (
        arrays["w_in"],
        arrays["w_rec"],
        arrays.get("b_h"),
        arrays["w_out"],
        arrays.get("b_out"),
    )


def rnn_forward(net: NetworkState, batch, h0=None, return_history=False):
    """
    Run the recurrence ``h_t = relu(x_t W_in + h_{t-1} W_rec + b_h)`` over every
    step of the window and read out ``y_t = h_t W_out + b_out`` at each step.

    Args:
        net (NetworkState): a recurrent network.
        batch (Batch or array): sequence inputs of shape (samples, T, features).
        h0 (array): initial hidden state, (hidden,) or (samples, hidden).
            Zeros when omitted.
        return_history (bool): also return every hidden state.
    Returns:
        RnnOutput
    """
    w_in, w_rec, b_h, w_out, b_out = rnn_params(net)
    inputs = _inputs_of(batch)
    spec = net.spec
    if inputs.ndim != 3 or inputs.shape[2] != spec.input_dim:
        raise ShapeMismatchError("sequence inputs", (None, None, spec.input_dim), inputs.shape)
    n_samples, n_steps, _ = inputs.shape
    if h0 is None:
        h = np.zeros((n_samples, spec.hidden_dim))
    else:
        h = np.broadcast_to(np.asarray(h0, dtype=np.float64), (n_samples, spec.hidden_dim))
    predictions = np.empty((n_samples, n_steps, spec.output_dim))
    history = np.empty((n_samples, n_steps, spec.hidden_dim)) if return_history else None
    for t in range(n_steps):
        pre = inputs[:, t, :] @ w_in + h @ w_rec
        if b_h is not None:
            pre = pre + b_h
        h = relu(pre)
        out = h @ w_out
        if b_out is not None:
            out = out + b_out
        predictions[:, t, :] = out
        if history is not None:
            history[:, t, :] = h
    return RnnOutput(predictions, np.array(h), history)


def bce_loss(probs, targets):
    """
    Mean negative log-probability of the true class.

    Args:
        probs (array): (samples, classes) probabilities.
        targets (array): (samples,) integer class labels.
    Raises:
        ProbabilityRangeError: if a probability lies outside [0, 1].
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(targets).astype(np.int64).reshape(-1)
    if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
        raise ShapeMismatchError("probabilities", (labels.shape[0], None), probs.shape)
    if not np.isfinite(probs).all():
        raise NonFiniteError("probabilities")
    if (probs < 0).any() or (probs > 1).any():
        raise ProbabilityRangeError("Probabilities must lie within [0, 1]")
    true_class = probs[np.arange(labels.shape[0]), labels]
    true_class = np.clip(true_class, BCE_PROBABILITY_FLOOR, 1.0)
    return float(-np.mean(np.log(true_class)))


def mse_loss(preds, targets):
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ShapeMismatchError("predictions", targets.shape, preds.shape)
    return float(np.mean((preds - targets) ** 2))


def step_mse(predictions, step_targets):
    "Per-step mean squared error of (samples, T, outputs) arrays, shape (T,)"
    predictions = np.asarray(predictions, dtype=np.float64)
    step_targets = np.asarray(step_targets, dtype=np.float64)
    if predictions.shape != step_targets.shape:
        raise ShapeMismatchError("step predictions", step_targets.shape, predictions.shape)
    return np.mean((predictions - step_targets) ** 2, axis=(0, 2))


def sequence_step_losses(net: NetworkState, batch: Batch):
    "Per-step MSE of a recurrent network over the window of `batch`"
    if batch.step_targets is None:
        raise ShapeMismatchError("step targets", batch.inputs.shape[:2], ())
    return step_mse(rnn_forward(net, batch).predictions, batch.step_targets)


def forecast_loss(net: NetworkState, batch: Batch):
    "Window-summed per-step MSE, the objective optimised on sequences"
    return float(np.sum(sequence_step_losses(net, batch)))


def mean_forecast_mse(net: NetworkState, batch: Batch):
    "Per-step MSE averaged over the window, the figure reported in loss curves"
    return float(np.mean(sequence_step_losses(net, batch)))


def classification_loss(net: NetworkState, batch: Batch):
    "BCE for probabilistic heads, MSE for a linear head"
    outputs = mlp_forward(net, batch)
    if net.spec.head.is_probabilistic:
        return bce_loss(outputs, batch.targets)
    return mse_loss(outputs, batch.targets)


def default_loss(net: NetworkState):
    "The objective a network is trained on when none is given"
    if isinstance(net.spec, RnnSpec):
        return forecast_loss
    if isinstance(net.spec, MlpSpec):
        return classification_loss
    raise TypeError("A loss function is required for free-standing parameters")


def predict_labels(net: NetworkState, inputs):
    return np.argmax(mlp_forward(net, inputs), axis=1)


def accuracy(net: NetworkState, batch: Batch):
    return float(np.mean(predict_labels(net, batch) == batch.targets.astype(np.int64)))


def init_network(spec: NetworkSpec, rng: np.random.Generator, init_scale=1.0):
    """
    Draw initial parameters.

    Weight matrices (recurrent included) are Gaussian with variance
    ``init_scale**2 / fan_in``; biases start at zero. Free-standing parameters
    are standard Gaussian times `init_scale`.
    """
    arrays = []
    for entry in spec.layout():
        if entry.role == ParamRole.BIAS:
            arrays.append(np.zeros(entry.shape))
        elif isinstance(spec, ParamSpec):
            arrays.append(init_scale * rng.standard_normal(entry.shape))
        else:
            fan_in = entry.shape[0]
            arrays.append(init_scale / np.sqrt(fan_in) * rng.standard_normal(entry.shape))
    return NetworkState.from_arrays(spec, arrays)


def decision_grid(net: NetworkState, bounds=(-0.5, 1.5), resolution=101):
    """
    Class-1 probability of a 2-input perceptron over a square grid.

    Returns:
        tuple: (x0 coordinates, x1 coordinates, probabilities of shape
        (resolution, resolution) indexed [i, j] -> (x0[i], x1[j])).
    """
    x0 = np.linspace(bounds[0], bounds[1], resolution)
    x1 = np.linspace(bounds[0], bounds[1], resolution)
    grid = np.stack(np.meshgrid(x0, x1, indexing="ij"), axis=-1).reshape(-1, 2)
    probs = mlp_forward(net, grid)[:, 1].reshape(resolution, resolution)
    return x0, x1, probs
