import os
import statistics

import numpy as np
import pytest

from dopawp.chaos import min_max_bounds, rossler_trajectory
from dopawp.config import preset
from dopawp.enums import RunStatus
from dopawp.experiment import run_experiment
from dopawp.gradients import bptt, bptt_memory_bytes, mlp_backprop
from dopawp.landscape import loss_landscape
from dopawp.nn import Batch, MlpSpec, RnnSpec, classification_loss, forecast_loss
from dopawp.perturbation import regret, sample_perturbation
from dopawp.timing import time_optimizer
from dopawp.training import report_loss, train
from dopawp.util import make_rng

from test.conftest import (
    DUMMY_BATCH,
    assert_gradients_close,
    central_difference,
    initialized_rnn,
    param_vector_net,
    quadratic_objective,
    random_net,
    random_sequence_batch,
)

slow = pytest.mark.skipif(
    not os.environ.get("DOPAWP_SLOW"), reason="set DOPAWP_SLOW=1 to run desk-scale experiments"
)


@pytest.fixture(name="rossler_series", scope="module")
def fixture_rossler_series():
    states = rossler_trajectory(n_steps=8300).states
    low, span = min_max_bounds(states)
    return (states - low) / span


@pytest.mark.timeout(10)
def test_perturbation_estimator_points_along_the_gradient():
    rng = make_rng(2024)
    loss, gradient = quadratic_objective(np.diag(np.linspace(0.5, 5.0, 10)), np.ones(10))
    net = param_vector_net(rng.standard_normal(10))
    sigma_sq = 1e-6
    estimate = np.zeros((1, 10))
    n_draws = 100000
    for _ in range(n_draws):
        draw = sample_perturbation(net, sigma_sq, rng)
        estimate += regret(net, draw, DUMMY_BATCH, loss).value * draw.noise[0]
    estimate /= n_draws * sigma_sq
    exact = gradient(net)
    cosine = np.sum(estimate * exact) / (np.linalg.norm(estimate) * np.linalg.norm(exact))
    assert cosine > 0.99


@pytest.mark.timeout(30)
def test_randomized_gradient_checks():
    rng = make_rng(7)
    for seed in range(10):
        net = random_net(MlpSpec((2, 3, 2)), seed)
        batch = Batch(rng.standard_normal((6, 2)), rng.integers(0, 2, size=6))
        _, grads = mlp_backprop(net, batch)
        assert_gradients_close(grads.grads, central_difference(classification_loss, net, batch))
    for seed in range(10):
        net = random_net(RnnSpec(input_dim=2, hidden_dim=3, output_dim=2), seed)
        batch = random_sequence_batch(seed, n_samples=3, lookback=4, dims=2)
        _, grads = bptt(net, batch)
        assert_gradients_close(grads.grads, central_difference(forecast_loss, net, batch))


@pytest.mark.timeout(120)
def test_dopamine_update_time_does_not_grow_with_the_window(rossler_series):
    net = initialized_rnn(hidden=64)
    records = time_optimizer(
        "dopamine2",
        net,
        rossler_series,
        [16, 64, 256, 1024],
        n_trials=30,
        warmup=3,
        hyperparams={"spectral_radius": None},
    )
    assert not any(record.failed for record in records)
    medians = [record.median_s for record in records]
    assert max(medians) / min(medians) < 2


@pytest.mark.timeout(120)
def test_full_iteration_costs_more_than_its_update(rossler_series):
    net = initialized_rnn(hidden=64)
    (update,) = time_optimizer("dopamine2", net, rossler_series, [64], n_trials=5, phase="update")
    (full,) = time_optimizer("dopamine2", net, rossler_series, [64], n_trials=5, phase="full")
    assert not update.failed and not full.failed
    assert full.median_s >= update.median_s


@pytest.mark.timeout(120)
def test_bptt_backward_time_grows_with_the_window(rossler_series):
    net = initialized_rnn(hidden=64)
    short, long = time_optimizer("sgd", net, rossler_series, [32, 1024], n_trials=5)
    assert not short.failed and not long.failed
    assert long.median_s > 10 * short.median_s


@pytest.mark.timeout(120)
def test_dopamine_runs_where_bptt_exceeds_the_memory_cap(rossler_series):
    net = initialized_rnn(hidden=64)
    cap = bptt_memory_bytes(8, 4096, 64)
    (bptt_record,) = time_optimizer("adam", net, rossler_series, [8192], n_trials=1, memory_cap_bytes=cap)
    (dopamine_record,) = time_optimizer(
        "dopamine2", net, rossler_series, [8192], n_trials=1, memory_cap_bytes=cap
    )
    assert bptt_record.failed and bptt_record.reason == "memory"
    assert not dopamine_record.failed


def _median_final_loss(records):
    return statistics.median(
        record.final_loss if record.status == RunStatus.OK else float("inf") for record in records
    )


def _in_parallel(name):
    return preset(name).with_overrides({"workers": 4})


@slow
@pytest.mark.slow
@pytest.mark.timeout(180)
def test_bias_free_xor_learns_the_offset():
    records = run_experiment(_in_parallel("xor-linear-dopamine1"), persist=False)
    solved = [record.solved_at for record in records if record.solved_at is not None]
    assert len(solved) >= 8
    assert all(epoch <= 50000 for epoch in solved)


@slow
@pytest.mark.slow
@pytest.mark.timeout(1800)
def test_rossler_scaled_forecasting():
    dopamine = run_experiment(_in_parallel("rossler-dopamine2-scaled"), persist=False)
    wp = run_experiment(_in_parallel("rossler-wp-scaled"), persist=False)
    median = _median_final_loss(dopamine)
    assert median < 0.01
    assert median < statistics.median(record.initial_loss for record in dopamine) / 10
    assert median < _median_final_loss(wp)


@slow
@pytest.mark.slow
@pytest.mark.timeout(1800)
def test_lorenz_scaled_forecasting():
    dopamine = run_experiment(_in_parallel("lorenz-dopamine2-scaled"), persist=False)
    wp = run_experiment(_in_parallel("lorenz-wp-scaled"), persist=False)
    assert _median_final_loss(dopamine) < _median_final_loss(wp)


@slow
@pytest.mark.slow
@pytest.mark.timeout(1800)
def test_lorenz_spectral_reset_beats_plain_wp_at_the_same_rate():
    swp_config = _in_parallel("lorenz-swp-scaled")
    wp_config = _in_parallel("lorenz-wp-scaled").with_overrides(
        {"name": "lorenz-wp-scaled-same-eta", "eta": swp_config.eta, "sigma_sq": swp_config.sigma_sq}
    )
    swp = run_experiment(swp_config, persist=False)
    wp = run_experiment(wp_config, persist=False)
    assert (wp_config.eta, wp_config.sigma_sq) == (swp_config.eta, swp_config.sigma_sq)
    assert _median_final_loss(swp) < _median_final_loss(wp)


@slow
@pytest.mark.slow
@pytest.mark.timeout(600)
def test_trained_xor_model_sits_in_the_valley():
    result, data = train(preset("xor-dopamine2-scaled"), seed=0)
    grid = loss_landscape(result.net, data.train, loss=report_loss, workers=4)
    (i, j), (ci, cj) = grid.minimum_cell(), grid.center_cell()
    assert abs(i - ci) <= 1 and abs(j - cj) <= 1
