import numpy as np
import pytest

from dopawp.enums import Head
from dopawp.errors import EmptyWindowError, MemoryBudgetExceededError, ShapeMismatchError
from dopawp.gradients import bptt, bptt_memory_bytes, mlp_backprop
from dopawp.nn import Batch, MlpSpec, NetworkState, RnnSpec, forecast_loss

from test.conftest import (
    assert_gradients_close,
    central_difference,
    random_net,
    random_sequence_batch,
)


def rnn(seed, hidden=8, use_bias=True):
    return random_net(RnnSpec(input_dim=3, hidden_dim=hidden, output_dim=3, use_bias=use_bias), seed)


def per_step_perceptron(net):
    "The feed-forward half of the cell: (w_in, b_h) then (w_out, b_out)"
    arrays = {p.name: p.data for p in net.params}
    spec = MlpSpec((3, net.spec.hidden_dim, 3), head=Head.LINEAR)
    return NetworkState.from_arrays(
        spec, [arrays["w_in"], arrays["b_h"], arrays["w_out"], arrays["b_out"]]
    )


def test_eight_unit_rnn_matches_finite_differences():
    net = rnn(seed=21)
    batch = random_sequence_batch(seed=21, lookback=5)
    value, grads = bptt(net, batch)
    assert value == pytest.approx(forecast_loss(net, batch), rel=1e-12)
    assert_gradients_close(grads.grads, central_difference(forecast_loss, net, batch))


def test_bias_free_rnn_matches_finite_differences():
    net = rnn(seed=22, hidden=6, use_bias=False)
    batch = random_sequence_batch(seed=22, lookback=4)
    _, grads = bptt(net, batch)
    assert len(grads.grads) == 3
    assert_gradients_close(grads.grads, central_difference(forecast_loss, net, batch))


def test_single_step_window_is_cell_backprop():
    net = rnn(seed=23)
    batch = random_sequence_batch(seed=23, lookback=1)
    _, grads = bptt(net, batch)
    step = Batch(batch.inputs[:, 0, :], batch.step_targets[:, 0, :])
    _, expected = mlp_backprop(per_step_perceptron(net), step)
    g_in, g_rec, g_bh, g_out, g_bout = grads.grads
    assert_gradients_close([g_in, g_bh, g_out, g_bout], expected.grads, rtol=1e-12, atol=1e-15)
    # no earlier hidden state, nothing flows into the recurrent matrix:
    assert not g_rec.any()


def test_zero_recurrence_sums_per_step_gradients():
    net = rnn(seed=24)
    net = net.with_arrays(
        [np.zeros_like(p.data) if p.name == "w_rec" else p.data for p in net.params]
    )
    batch = random_sequence_batch(seed=24, lookback=4)
    _, grads = bptt(net, batch)
    mlp = per_step_perceptron(net)
    totals = None
    for t in range(4):
        step = Batch(batch.inputs[:, t, :], batch.step_targets[:, t, :])
        _, step_grads = mlp_backprop(mlp, step)
        if totals is None:
            totals = [g.copy() for g in step_grads.grads]
        else:
            totals = [total + g for total, g in zip(totals, step_grads.grads)]
    g_in, _, g_bh, g_out, g_bout = grads.grads
    assert_gradients_close([g_in, g_bh, g_out, g_bout], totals, rtol=1e-10, atol=1e-14)


def test_truncated_window_matches_finite_differences_of_the_tail():
    net = rnn(seed=25)
    batch = random_sequence_batch(seed=25, lookback=6)
    _, grads = bptt(net, batch, window=6)
    _, full = bptt(net, batch)
    for a, b in zip(grads.grads, full.grads):
        np.testing.assert_array_equal(a, b)
    value, tail = bptt(net, batch, window=2)
    assert value < forecast_loss(net, batch)
    assert [g.shape for g in tail.grads] == [p.shape for p in net.params]


def test_empty_window_is_rejected():
    with pytest.raises(EmptyWindowError):
        bptt(rnn(seed=26), random_sequence_batch(), window=0)


def test_window_longer_than_sequence_is_rejected():
    with pytest.raises(ShapeMismatchError):
        bptt(rnn(seed=26), random_sequence_batch(lookback=3), window=4)


def test_history_memory_grows_with_the_window():
    assert bptt_memory_bytes(4, 5, 8) == 2560
    assert bptt_memory_bytes(4, 10, 8) == 2 * bptt_memory_bytes(4, 5, 8)


def test_memory_cap():
    batch = random_sequence_batch(lookback=5)
    with pytest.raises(MemoryBudgetExceededError) as error:
        bptt(rnn(seed=27), batch, memory_cap_bytes=1000)
    assert str(error.value) == (
        "Unrolling requires 2560 bytes of hidden-state history,"
        " above the memory cap of 1000 bytes"
    )
    bptt(rnn(seed=27), batch, memory_cap_bytes=2560)
