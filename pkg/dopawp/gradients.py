"""
Gradient-based baselines: hand-written backprop for perceptrons, truncated
backpropagation through time for the RNN, and the SGD / Adam update rules.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Tuple

import numpy as np
from scipy.special import expit

from .enums import Head
from .errors import (
    EmptyWindowError,
    InvalidHyperparameterError,
    MemoryBudgetExceededError,
    ShapeMismatchError,
)
from .nn import (
    BCE_PROBABILITY_FLOOR,
    Batch,
    MlpSpec,
    NetworkState,
    RnnSpec,
    apply_head,
    bce_loss,
    mlp_layers,
    mse_loss,
    relu,
    rnn_forward,
    rnn_params,
    step_mse,
)

LOGGER = logging.getLogger(__name__)

FLOAT_BYTES = 8


class GradientSet(NamedTuple):
    "One gradient matrix per parameter matrix, in layout order"

    grads: Tuple[np.ndarray, ...]

    @classmethod
    def zeros_like(cls, net: NetworkState):
        return cls(tuple(np.zeros(p.shape) for p in net.params))

    def check_matches(self, net: NetworkState):
        if len(self.grads) != len(net.params):
            raise ShapeMismatchError("gradient set", (len(net.params),), (len(self.grads),))
        for param, grad in zip(net.params, self.grads):
            if grad.shape != param.shape:
                raise ShapeMismatchError(f"gradient of {param.name!r}", param.shape, grad.shape)

    def norm(self):
        return math.sqrt(sum(float(np.sum(g * g)) for g in self.grads))

    def clipped(self, max_norm):
        "Rescaled so that the global norm does not exceed `max_norm`"
        norm = self.norm()
        if norm <= max_norm or norm == 0.0:
            return self
        scale = max_norm / norm
        return GradientSet(tuple(g * scale for g in self.grads))


def _head_delta(head, logits, batch, loss):
    "Loss value and its derivative with respect to the output-layer pre-activations"
    if loss is bce_loss:
        if not head.is_probabilistic:
            raise ValueError("BCE requires a probabilistic head")
        probs = apply_head(head, logits)
        value = bce_loss(probs, batch.targets)
        n_samples = logits.shape[0]
        labels = batch.targets.astype(np.int64).reshape(-1)
        onehot = np.zeros_like(probs)
        onehot[np.arange(n_samples), labels] = 1.0
        delta = (probs - onehot) / n_samples
        # samples clamped at the probability floor contribute a flat loss:
        clamped = probs[np.arange(n_samples), labels] < BCE_PROBABILITY_FLOOR
        delta[clamped] = 0.0
        if head == Head.SIGMOID_SOFTMAX:
            squashed = expit(logits)
            delta = delta * squashed * (1.0 - squashed)
        return value, delta
    if loss is mse_loss:
        if head != Head.LINEAR:
            raise ValueError("MSE backprop is supported for the linear head only")
        targets = np.asarray(batch.targets, dtype=np.float64).reshape(logits.shape)
        return mse_loss(logits, targets), 2.0 * (logits - targets) / logits.size
    raise ValueError(f"Unsupported loss for backprop: {loss}")


def mlp_backprop(net: NetworkState, batch: Batch, loss=None):
    """
    Exact gradients of a perceptron loss.

    Args:
        loss: `bce_loss` (probabilistic heads) or `mse_loss` (linear head).
            Defaults to the one matching the head.
    Returns:
        tuple: (loss value, GradientSet)
    """
    spec = net.spec
    if not isinstance(spec, MlpSpec):
        raise TypeError("mlp_backprop() requires a perceptron NetworkState")
    if loss is None:
        loss = bce_loss if spec.head.is_probabilistic else mse_loss
    inputs = batch.inputs
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ShapeMismatchError("perceptron inputs", (None, spec.input_dim), inputs.shape)
    layers = list(mlp_layers(net))
    activations, pre_activations = [inputs], []
    h = inputs
    for i, (weights, bias) in enumerate(layers):
        z = h @ weights
        if bias is not None:
            z = z + bias
        pre_activations.append(z)
        if i < len(layers) - 1:
            h = relu(z)
            activations.append(h)
    value, delta = _head_delta(spec.head, pre_activations[-1], batch, loss)
    per_layer = [None] * len(layers)
    for i in reversed(range(len(layers))):
        weights, bias = layers[i]
        grad_w = activations[i].T @ delta
        grad_b = delta.sum(axis=0, keepdims=True) if bias is not None else None
        per_layer[i] = (grad_w, grad_b)
        if i > 0:
            delta = (delta @ weights.T) * (pre_activations[i - 1] > 0)
    grads = []
    for grad_w, grad_b in per_layer:
        grads.append(grad_w)
        if grad_b is not None:
            grads.append(grad_b)
    return value, GradientSet(tuple(grads))


class BpttCache(NamedTuple):
    "Everything the backward pass of an unrolled window needs"

    inputs: np.ndarray
    step_targets: np.ndarray
    h_start: np.ndarray
    pre_activations: np.ndarray
    hidden: np.ndarray
    predictions: np.ndarray


def bptt_memory_bytes(n_samples, window, hidden_dim):
    "Bytes of hidden-state history held while unrolling a window"
    return 2 * n_samples * window * hidden_dim * FLOAT_BYTES


def bptt_forward(net: NetworkState, batch: Batch, window=None, memory_cap_bytes=None):
    """
    Forward pass keeping the hidden-state history of the last `window` steps.

    Steps before the window only carry the hidden state forward; no gradient
    flows through them.

    Returns:
        tuple: (window-summed per-step MSE, BpttCache)
    Raises:
        EmptyWindowError: if `window` is 0.
        MemoryBudgetExceededError: if the history exceeds `memory_cap_bytes`.
    """
    spec = net.spec
    if not isinstance(spec, RnnSpec):
        raise TypeError("bptt() requires a recurrent NetworkState")
    if batch.step_targets is None:
        raise ShapeMismatchError("step targets", batch.inputs.shape[:2], ())
    lookback = batch.lookback
    window = lookback if window is None else int(window)
    if window < 1:
        raise EmptyWindowError("BPTT needs a window of at least one step")
    if window > lookback:
        raise ShapeMismatchError("BPTT window", (lookback,), (window,))
    n_samples = batch.n_samples
    required = bptt_memory_bytes(n_samples, window, spec.hidden_dim)
    if memory_cap_bytes is not None and required > memory_cap_bytes:
        raise MemoryBudgetExceededError(required, memory_cap_bytes)
    w_in, w_rec, b_h, w_out, b_out = rnn_params(net)
    burn_in = lookback - window
    if burn_in:
        h = rnn_forward(net, batch.inputs[:, :burn_in, :]).final_hidden
    else:
        h = np.zeros((n_samples, spec.hidden_dim))
    h_start = h
    inputs = batch.inputs[:, burn_in:, :]
    step_targets = batch.step_targets[:, burn_in:, :]
    pre_activations = np.empty((n_samples, window, spec.hidden_dim))
    hidden = np.empty((n_samples, window, spec.hidden_dim))
    predictions = np.empty((n_samples, window, spec.output_dim))
    for t in range(window):
        pre = inputs[:, t, :] @ w_in + h @ w_rec
        if b_h is not None:
            pre = pre + b_h
        h = relu(pre)
        out = h @ w_out
        if b_out is not None:
            out = out + b_out
        pre_activations[:, t, :] = pre
        hidden[:, t, :] = h
        predictions[:, t, :] = out
    value = float(np.sum(step_mse(predictions, step_targets)))
    return value, BpttCache(inputs, step_targets, h_start, pre_activations, hidden, predictions)


def bptt_backward(net: NetworkState, cache: BpttCache):
    "Gradients of the window-summed per-step MSE from a `bptt_forward` cache"
    w_in, w_rec, b_h, w_out, b_out = rnn_params(net)
    n_samples, window, n_outputs = cache.predictions.shape
    d_outputs = 2.0 * (cache.predictions - cache.step_targets) / (n_samples * n_outputs)
    grad_w_in = np.zeros_like(w_in)
    grad_w_rec = np.zeros_like(w_rec)
    grad_b_h = np.zeros((1, w_rec.shape[0]))
    grad_w_out = np.zeros_like(w_out)
    grad_b_out = np.zeros((1, w_out.shape[1]))
    d_hidden_next = np.zeros((n_samples, w_rec.shape[0]))
    for t in reversed(range(window)):
        d_out = d_outputs[:, t, :]
        h = cache.hidden[:, t, :]
        grad_w_out += h.T @ d_out
        grad_b_out += d_out.sum(axis=0, keepdims=True)
        d_hidden = d_out @ w_out.T + d_hidden_next
        d_pre = d_hidden * (cache.pre_activations[:, t, :] > 0)
        h_prev = cache.hidden[:, t - 1, :] if t > 0 else cache.h_start
        grad_w_in += cache.inputs[:, t, :].T @ d_pre
        grad_w_rec += h_prev.T @ d_pre
        grad_b_h += d_pre.sum(axis=0, keepdims=True)
        d_hidden_next = d_pre @ w_rec.T
    grads = [grad_w_in, grad_w_rec]
    if b_h is not None:
        grads.append(grad_b_h)
    grads.append(grad_w_out)
    if b_out is not None:
        grads.append(grad_b_out)
    return GradientSet(tuple(grads))


def bptt(net: NetworkState, batch: Batch, window=None, memory_cap_bytes=None):
    """
    Backpropagation through time over the last `window` steps of each sequence.

    Returns:
        tuple: (window-summed per-step MSE, GradientSet)
    """
    value, cache = bptt_forward(net, batch, window=window, memory_cap_bytes=memory_cap_bytes)
    return value, bptt_backward(net, cache)


def sgd_step(net: NetworkState, grads: GradientSet, eta):
    "``theta <- theta - eta * g`` for every layer"
    if not eta > 0:
        raise InvalidHyperparameterError("eta", eta, "eta > 0")
    grads.check_matches(net)
    return net.with_arrays([p.data - eta * g for p, g in zip(net.params, grads.grads)])


@dataclass(frozen=True)
class AdamState:
    first_moments: Tuple[np.ndarray, ...]
    second_moments: Tuple[np.ndarray, ...]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidHyperparameterError("lr", self.lr, "lr > 0")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise InvalidHyperparameterError(name, value, f"0 <= {name} < 1")

    @classmethod
    def initial(cls, net: NetworkState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        zeros = tuple(np.zeros(p.shape) for p in net.params)
        return cls(zeros, zeros, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, net: NetworkState, grads: GradientSet):
    """
    Bias-corrected Adam update.

    Returns:
        tuple: (AdamState, NetworkState)
    """
    grads.check_matches(net)
    step = state.step + 1
    correction1 = 1.0 - state.beta1 ** step
    correction2 = 1.0 - state.beta2 ** step
    first, second, arrays = [], [], []
    for param, m, v, g in zip(net.params, state.first_moments, state.second_moments, grads.grads):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        arrays.append(param.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        first.append(m)
        second.append(v)
    new_state = replace(state, first_moments=tuple(first), second_moments=tuple(second), step=step)
    return new_state, net.with_arrays(arrays)
