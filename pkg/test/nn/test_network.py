import math

import numpy as np
import pytest
from scipy.special import expit

from dopawp.enums import Head, ParamRole
from dopawp.errors import NonFiniteError, ShapeMismatchError
from dopawp.nn import (
    Batch,
    MlpSpec,
    NetworkState,
    ParamMatrix,
    RnnSpec,
    accuracy,
    classification_loss,
    decision_grid,
    forecast_loss,
    init_network,
    mean_forecast_mse,
    mlp_forward,
    rnn_forward,
)
from dopawp.util import make_rng

from test.conftest import canonical_xor, random_net, random_sequence_batch, small_mlp, zero_net


def test_param_matrix_is_read_only():
    param = ParamMatrix([[1.0, 2.0]], name="w0")
    with pytest.raises(ValueError):
        param.data[0, 0] = 3.0
    assert param.shape == (1, 2)
    assert repr(param) == "ParamMatrix('w0', weight, 1x2)"


def test_param_matrix_rejects_non_finite_values():
    with pytest.raises(NonFiniteError) as error:
        ParamMatrix([[1.0, math.nan]], name="w0")
    assert str(error.value) == "Non-finite parameters of w0"


def test_mlp_layout():
    spec = MlpSpec((2, 4, 2), use_bias=(True, False))
    assert [(e.name, e.role, e.shape) for e in spec.layout()] == [
        ("w0", ParamRole.WEIGHT, (2, 4)),
        ("b0", ParamRole.BIAS, (1, 4)),
        ("w1", ParamRole.WEIGHT, (4, 2)),
    ]


def test_mlp_spec_needs_a_hidden_layer():
    with pytest.raises(ShapeMismatchError):
        MlpSpec((2, 2))


def test_rnn_layout():
    spec = RnnSpec(input_dim=3, hidden_dim=8, output_dim=3)
    assert [e.name for e in spec.layout()] == ["w_in", "w_rec", "b_h", "w_out", "b_out"]
    assert spec.layout()[1].role == ParamRole.RECURRENT
    assert [e.name for e in RnnSpec(use_bias=False).layout()] == ["w_in", "w_rec", "w_out"]


def test_network_state_checks_shapes():
    spec = MlpSpec((2, 4, 2))
    arrays = [np.zeros(e.shape) for e in spec.layout()]
    arrays[0] = np.zeros((3, 4))
    with pytest.raises(ShapeMismatchError) as error:
        NetworkState.from_arrays(spec, arrays)
    assert str(error.value) == "Invalid shape for parameter 'w0': expected (2, 4), got (3, 4)"


def test_shifted_leaves_receiver_untouched():
    net = small_mlp(seed=1)
    before = net.checksum()
    moved = net.shifted([np.ones(p.shape) for p in net.params], scale=0.5)
    assert net.checksum() == before
    np.testing.assert_array_equal(moved.params[0].data, net.params[0].data + 0.5)


def test_init_network_is_deterministic():
    spec = RnnSpec(hidden_dim=16)
    first = init_network(spec, make_rng(3))
    second = init_network(spec, make_rng(3))
    assert first.checksum() == second.checksum()
    assert not first.param("b_h").data.any()


def test_zero_mlp_gives_uniform_outputs():
    net = zero_net(MlpSpec((2, 4, 2)))
    probs = mlp_forward(net, canonical_xor())
    np.testing.assert_array_equal(probs, np.full((4, 2), 0.5))
    assert classification_loss(net, canonical_xor()) == pytest.approx(math.log(2), rel=1e-12)


def test_bias_free_mlp_maps_zero_input_to_uniform():
    net = small_mlp(seed=2, use_bias=False)
    np.testing.assert_allclose(mlp_forward(net, np.zeros((1, 2))), [[0.5, 0.5]], atol=1e-15)


def test_mlp_forward_matches_straight_line_algebra():
    net = small_mlp(seed=5)
    batch = canonical_xor()
    w0, b0, w1, b1 = (p.data for p in net.params)
    hidden = np.maximum(batch.inputs @ w0 + b0, 0.0)
    squashed = expit(hidden @ w1 + b1)
    expected = np.exp(squashed) / np.exp(squashed).sum(axis=1, keepdims=True)
    np.testing.assert_allclose(mlp_forward(net, batch), expected, rtol=0, atol=1e-12)


def test_linear_head_returns_logits():
    net = random_net(MlpSpec((2, 3, 1), head=Head.LINEAR), seed=0)
    w0, b0, w1, b1 = (p.data for p in net.params)
    inputs = np.array([[0.2, -0.4]])
    expected = np.maximum(inputs @ w0 + b0, 0.0) @ w1 + b1
    np.testing.assert_allclose(mlp_forward(net, inputs), expected, atol=1e-15)


def test_mlp_forward_rejects_wrong_feature_count():
    with pytest.raises(ShapeMismatchError):
        mlp_forward(small_mlp(), np.zeros((4, 3)))


def test_accuracy_and_decision_grid():
    net = zero_net(MlpSpec((2, 4, 2)))
    # ties resolve to class 0, which is right on half of the corners:
    assert accuracy(net, canonical_xor()) == 0.5
    x0, x1, probs = decision_grid(net, resolution=11)
    assert x0[0] == -0.5 and x1[-1] == 1.5
    assert probs.shape == (11, 11)


def test_zero_rnn_predicts_zeros():
    net = zero_net(RnnSpec(input_dim=3, hidden_dim=4, output_dim=3))
    output = rnn_forward(net, random_sequence_batch(), return_history=True)
    assert not output.predictions.any()
    assert not output.history.any()
    assert not output.final_hidden.any()


def test_rnn_without_recurrence_is_a_per_step_perceptron():
    rnn = random_net(RnnSpec(input_dim=3, hidden_dim=6, output_dim=3), seed=4)
    arrays = {p.name: p.data for p in rnn.params}
    rnn = rnn.with_arrays(
        [np.zeros_like(p.data) if p.name == "w_rec" else p.data for p in rnn.params]
    )
    mlp = NetworkState.from_arrays(
        MlpSpec((3, 6, 3), head=Head.LINEAR),
        [arrays["w_in"], arrays["b_h"], arrays["w_out"], arrays["b_out"]],
    )
    batch = random_sequence_batch(seed=1, lookback=4)
    predictions = rnn_forward(rnn, batch).predictions
    for t in range(4):
        np.testing.assert_allclose(
            predictions[:, t, :], mlp_forward(mlp, batch.inputs[:, t, :]), rtol=0, atol=1e-12
        )


def test_two_unit_cell_matches_hand_unrolling():
    spec = RnnSpec(input_dim=1, hidden_dim=2, output_dim=1)
    net = NetworkState.from_arrays(
        spec,
        [
            [[1.0, -0.5]],
            [[0.5, 0.1], [-0.2, 0.3]],
            [[0.1, 0.0]],
            [[1.0], [2.0]],
            [[-0.1]],
        ],
    )
    inputs = np.array([1.0, 2.0, -1.0]).reshape(1, 3, 1)
    output = rnn_forward(net, inputs, return_history=True)
    # h1 = (1.1, 0), h2 = (2.65, 0), h3 = (0.425, 0.765)
    np.testing.assert_allclose(output.predictions.ravel(), [1.0, 2.55, 1.855], atol=1e-12)
    np.testing.assert_allclose(output.final_hidden, [[0.425, 0.765]], atol=1e-12)
    np.testing.assert_allclose(output.history[0, 1], [2.65, 0.0], atol=1e-12)


def test_rnn_forward_uses_initial_hidden_state():
    net = random_net(RnnSpec(input_dim=3, hidden_dim=5, output_dim=3), seed=2)
    batch = random_sequence_batch(seed=2, lookback=3)
    first = rnn_forward(net, batch.inputs[:, :1, :])
    rest = rnn_forward(net, batch.inputs[:, 1:, :], h0=first.final_hidden)
    whole = rnn_forward(net, batch)
    np.testing.assert_allclose(whole.predictions[:, 1:, :], rest.predictions, atol=1e-12)


def test_forecast_loss_sums_what_mean_forecast_mse_averages():
    net = random_net(RnnSpec(input_dim=3, hidden_dim=5, output_dim=3), seed=3)
    batch = random_sequence_batch(seed=3, lookback=7)
    assert forecast_loss(net, batch) == pytest.approx(7 * mean_forecast_mse(net, batch), rel=1e-12)


def test_sequence_batch_checks_step_targets():
    with pytest.raises(ShapeMismatchError):
        Batch(np.zeros((2, 3, 1)), np.zeros((2, 1)), np.zeros((2, 4, 1)))
