"""
Training loops tying networks, datasets and optimizers together.

One epoch is one optimizer iteration on a (mini)batch. The loss recorded for
an epoch is the loss of the parameters the iteration started from: the BCE
for XOR, the per-step MSE averaged over the window for forecasting.
"""
import logging
import math
import time
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .chaos import (
    WindowedDataset,
    forecasting_series,
    lorenz_trajectory,
    make_windows,
    rossler_trajectory,
    train_test_split,
    xor_dataset,
)
from .config import ExperimentConfig
from .dopamine import DopamineState, dopamine_step
from .enums import DopamineVariant, OptimizerId, RunStatus, Task
from .errors import NonFiniteError, SpectralResetError
from .gradients import AdamState, adam_step, bptt, mlp_backprop, sgd_step
from .nn import (
    Batch,
    MlpSpec,
    NetworkState,
    RnnSpec,
    accuracy,
    classification_loss,
    init_network,
    mean_forecast_mse,
)
from .perturbation import WpConfig, wp_step
from .util import split_seed

LOGGER = logging.getLogger(__name__)


class TaskData(NamedTuple):
    "The data of one run"

    train: Batch
    test: Optional[Batch] = None
    windows: Optional[WindowedDataset] = None
    "Forecasting windows, with the normalization bounds"


class TrainingResult(NamedTuple):
    net: NetworkState
    losses: Tuple[float, ...]
    status: RunStatus
    initial_loss: float
    final_loss: float
    "Loss of the final parameters on the whole training set, NaN after divergence"
    test_loss: Optional[float]
    canonical_accuracy: Optional[float]
    "XOR only: fraction of the 4 noise-free corners classified correctly"
    wall_time_s: float
    diverged_at: Optional[int] = None
    message: str = ""
    trace_names: Tuple[str, ...] = ()
    traces: Tuple[Tuple[float, ...], ...] = ()
    "Optimizer variables after every completed epoch, one tuple per epoch"
    solved_at: Optional[int] = None
    "XOR only: first epoch after which all 4 corners were classified correctly (0: at init)"


@lru_cache(maxsize=8)
def _forecasting_windows(task, series_length, dt, coordinate, lookback, normalize):
    generate = lorenz_trajectory if task == Task.LORENZ else rossler_trajectory
    trajectory = generate(n_steps=series_length, dt=dt)
    return make_windows(forecasting_series(trajectory, coordinate), lookback, normalize=normalize)


def build_task_data(config: ExperimentConfig, data_rng):
    """
    Generate the dataset of a run.

    Forecasting trajectories are deterministic and shared by every seed; XOR
    points and their train/test split come from the data stream of the seed.
    """
    if config.task.is_forecasting:
        windows = _forecasting_windows(
            config.task,
            config.series_length,
            config.dt,
            config.coordinate,
            config.lookback,
            config.normalize,
        )
        return TaskData(windows.to_batch(), None, windows)
    batch = xor_dataset(config.n_per_cluster, config.noise_std, data_rng)
    if config.test_fraction == 0:
        return TaskData(batch)
    train, test = train_test_split(batch, data_rng, config.test_fraction)
    return TaskData(train, test)


def build_spec(config: ExperimentConfig):
    if config.task.is_forecasting:
        dims = 1 if config.coordinate else 3
        return RnnSpec(
            input_dim=dims,
            hidden_dim=config.hidden_dim,
            output_dim=dims,
            use_bias=config.use_bias,
        )
    return MlpSpec((2, config.hidden_dim, 2), use_bias=config.use_bias, head=config.head)


def report_loss(net: NetworkState, batch: Batch):
    "The figure written to loss curves and summaries"
    if batch.is_sequence:
        return mean_forecast_mse(net, batch)
    return classification_loss(net, batch)


class Trainer:
    """
    One optimizer bound to a run.

    `step` returns the new parameters and the epoch loss; `trace` the
    optimizer variables named by `trace_names` after that step.
    """

    trace_names: Tuple[str, ...] = ()

    def __init__(self, config: ExperimentConfig, net: NetworkState):
        self.config = config

    def step(self, net: NetworkState, batch: Batch, rng):
        raise NotImplementedError

    def trace(self):
        return ()


class WpTrainer(Trainer):
    def __init__(self, config, net):
        super().__init__(config, net)
        self.wp_config = WpConfig(
            config.eta,
            config.sigma_sq,
            spectral_radius=config.spectral_radius,
            reset_interval=config.reset_interval,
            draws_per_step=config.draws_per_step,
        )
        self.iteration = 0
        self.trace_names = ("regret",)
        self.score = None

    def step(self, net, batch, rng):
        net, self.score = wp_step(self.wp_config, net, batch, rng, step=self.iteration)
        self.iteration += 1
        return net, _epoch_loss(self.score.base_loss, batch)

    def trace(self):
        return (self.score.value,)


class DopamineTrainer(Trainer):
    def __init__(self, config, net):
        super().__init__(config, net)
        self.state = DopamineState.initial(
            net,
            config.eta,
            config.s0,
            config.beta_s,
            config.beta_eta,
            config.sigma_sq,
            variant=DopamineVariant.coerce(config.optimizer.value),
            spectral_radius=config.spectral_radius,
            reset_interval=config.reset_interval,
            eta_floor=config.eta_floor,
            draws_per_step=config.draws_per_step,
            s_per_layer=config.s_per_layer,
        )
        self.trace_names = ("regret", "s") + tuple(f"eta_{param.name}" for param in net.params)
        self.score = None

    def step(self, net, batch, rng):
        self.state, net, self.score = dopamine_step(self.state, net, batch, rng)
        return net, _epoch_loss(self.score.base_loss, batch)

    def trace(self):
        return (self.score.value, self.state.s) + self.state.eta


class GradientTrainer(Trainer):
    def __init__(self, config, net):
        super().__init__(config, net)
        self.adam = AdamState.initial(net, lr=config.eta) if config.optimizer == OptimizerId.ADAM else None

    def step(self, net, batch, rng):
        if batch.is_sequence:
            value, grads = bptt(net, batch)
        else:
            value, grads = mlp_backprop(net, batch)
        if not math.isfinite(value):
            raise NonFiniteError("loss", value)
        if self.config.clip_norm is not None:
            grads = grads.clipped(self.config.clip_norm)
        if self.adam is not None:
            self.adam, net = adam_step(self.adam, net, grads)
        else:
            net = sgd_step(net, grads, self.config.eta)
        return net, _epoch_loss(value, batch)


def _epoch_loss(value, batch):
    # sequence objectives are summed over the window, reported per step:
    if batch.is_sequence:
        return value / batch.lookback
    return value


def make_trainer(config: ExperimentConfig, net: NetworkState) -> Trainer:
    if config.optimizer.is_dopamine:
        return DopamineTrainer(config, net)
    if config.optimizer.is_perturbative:
        return WpTrainer(config, net)
    return GradientTrainer(config, net)


def sample_batch(batch: Batch, batch_size, rng):
    "A minibatch drawn without replacement, or the whole batch"
    if batch_size is None or batch_size >= batch.n_samples:
        return batch
    indices = np.sort(rng.choice(batch.n_samples, size=batch_size, replace=False))
    return batch.subset(indices)


def train(config: ExperimentConfig, seed, data: Optional[TaskData] = None):
    """
    Train one network from one seed.

    Divergence (non-finite losses, parameters or learning rates, floating
    point overflow) ends the run early with `RunStatus.DIVERGED`; it is never
    raised.

    Returns:
        tuple: (TrainingResult, TaskData)
    """
    streams = split_seed(seed)
    if data is None:
        data = build_task_data(config, streams.data)
    net = init_network(build_spec(config), streams.init, config.init_scale)
    initial_loss = report_loss(net, data.train)
    trainer = make_trainer(config, net)
    losses, traces = [], []
    corners = xor_dataset(1, 0.0) if config.task == Task.XOR else None
    solved_at = 0 if corners is not None and accuracy(net, corners) == 1.0 else None
    status, diverged_at, message = RunStatus.OK, None, ""
    start = time.perf_counter()
    LOGGER.info("%s seed %d: training for %d epochs", config.name, seed, config.epochs)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        for epoch in range(config.epochs):
            batch = sample_batch(data.train, config.batch_size, streams.perturbation)
            try:
                net, loss = trainer.step(net, batch, streams.perturbation)
            except (NonFiniteError, FloatingPointError, SpectralResetError) as error:
                status, diverged_at, message = RunStatus.DIVERGED, epoch, str(error)
                LOGGER.warning("%s seed %d diverged at epoch %d: %s", config.name, seed, epoch, error)
                break
            losses.append(loss)
            traces.append(trainer.trace())
            if solved_at is None and corners is not None and accuracy(net, corners) == 1.0:
                solved_at = epoch + 1
            if (epoch + 1) % config.log_every == 0:
                LOGGER.debug("%s seed %d epoch %d: loss %g", config.name, seed, epoch + 1, loss)
    wall_time = time.perf_counter() - start
    final_loss = test_loss = canonical = None
    if status == RunStatus.OK:
        final_loss = report_loss(net, data.train)
        if data.test is not None:
            test_loss = report_loss(net, data.test)
        if config.task == Task.XOR:
            canonical = accuracy(net, corners)
        LOGGER.info("%s seed %d: final loss %g", config.name, seed, final_loss)
    else:
        final_loss = math.nan
    result = TrainingResult(
        net,
        tuple(losses),
        status,
        initial_loss,
        final_loss,
        test_loss,
        canonical,
        wall_time,
        diverged_at,
        message,
        trainer.trace_names,
        tuple(traces),
        solved_at,
    )
    return result, data
