import numpy as np

from dopawp.chaos import xor_dataset
from dopawp.nn import Batch, MlpSpec, NetworkState, ParamSpec, RnnSpec, init_network
from dopawp.util import make_rng

DUMMY_BATCH = Batch(np.zeros((1, 1)), np.zeros(1))
"Placeholder data for objectives that ignore it"


def scalar_net(value):
    "A single 1x1 parameter matrix"
    return NetworkState.from_arrays(ParamSpec(((1, 1),)), [np.array([[value]])])


def param_vector_net(values):
    "A single 1 x d parameter matrix"
    values = np.asarray(values, dtype=np.float64).reshape(1, -1)
    return NetworkState.from_arrays(ParamSpec((values.shape,)), [values])


def square_loss(net, batch):
    "L(theta) = sum of squared parameters"
    return float(sum(np.sum(p.data**2) for p in net.params))


def quadratic_objective(hessian, center):
    """
    Build ``L(theta) = 0.5 (theta - c) H (theta - c)^T`` over a single
    (1, d) parameter matrix.

    Returns:
        tuple: (loss function, gradient function)
    """
    hessian = np.asarray(hessian, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64).reshape(1, -1)

    def loss(net, batch):
        diff = net.params[0].data - center
        return float(0.5 * (diff @ hessian @ diff.T)[0, 0])

    def gradient(net):
        return (net.params[0].data - center) @ hessian

    return loss, gradient


def random_net(spec, seed=0, scale=0.5):
    """
    Every entry (biases included) drawn from N(0, scale^2), so that no ReLU
    pre-activation sits exactly on its kink.
    """
    rng = make_rng(seed)
    return NetworkState.from_arrays(
        spec, [scale * rng.standard_normal(entry.shape) for entry in spec.layout()]
    )


def zero_net(spec):
    return NetworkState.from_arrays(spec, [np.zeros(entry.shape) for entry in spec.layout()])


def small_mlp(seed=0, hidden=4, use_bias=True, head="sigmoid_softmax"):
    return random_net(MlpSpec((2, hidden, 2), use_bias=use_bias, head=head), seed, scale=1.0)


def small_rnn(seed=0, hidden=5, dims=3, use_bias=True):
    return random_net(
        RnnSpec(input_dim=dims, hidden_dim=hidden, output_dim=dims, use_bias=use_bias), seed
    )


def initialized_rnn(seed=0, hidden=64, dims=3):
    "A recurrent network as training starts it, rho(W_rec) close to one"
    return init_network(
        RnnSpec(input_dim=dims, hidden_dim=hidden, output_dim=dims), make_rng(seed)
    )


def random_sequence_batch(seed=0, n_samples=4, lookback=6, dims=3):
    rng = make_rng(seed)
    inputs = rng.standard_normal((n_samples, lookback, dims))
    step_targets = rng.standard_normal((n_samples, lookback, dims))
    return Batch(inputs, step_targets[:, -1, :], step_targets)


def canonical_xor():
    "The 4 noise-free XOR points"
    return xor_dataset(1, 0.0)


def central_difference(loss, net, batch, eps=1e-6):
    "Central finite-difference gradient of `loss` for every parameter entry"
    grads = []
    for index, param in enumerate(net.params):
        grad = np.zeros(param.shape)
        for position in np.ndindex(param.shape):
            arrays = [p.data.copy() for p in net.params]
            arrays[index][position] += eps
            plus = loss(net.with_arrays(arrays), batch)
            arrays[index][position] -= 2 * eps
            minus = loss(net.with_arrays(arrays), batch)
            grad[position] = (plus - minus) / (2 * eps)
        grads.append(grad)
    return grads


def assert_gradients_close(actual, expected, rtol=1e-4, atol=1e-8):
    assert len(actual) == len(expected)
    for a, e in zip(actual, expected):
        assert a.shape == e.shape
        np.testing.assert_allclose(a, e, rtol=rtol, atol=atol)
