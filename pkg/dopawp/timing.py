"""
Wall-clock cost of one optimizer iteration as the sequence window grows.

Perturbative optimizers only need the regret once the two forward passes are
done, so their update phase is independent of the window length T. BPTT has
to walk back through every step of the window and keep its whole hidden-state
history, which this module measures side by side.
"""
import csv
import logging
import time
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .chaos import make_windows
from .dopamine import DopamineState, dopamine_apply, dopamine_step
from .enums import DopamineVariant, OptimizerId, TimingPhase
from .errors import (
    EmptyWindowError,
    MemoryBudgetExceededError,
    NonFiniteError,
)
from .gradients import AdamState, adam_step, bptt, bptt_backward, bptt_forward, sgd_step
from .perturbation import (
    WpConfig,
    apply_perturbation_update,
    compute_regret,
    reset_recurrent,
    sample_perturbation,
    wp_step,
)
from .stats import mean_and_sem
from .util import format_float, make_rng

LOGGER = logging.getLogger(__name__)

TIMING_HYPERPARAMS = {
    "eta": 1e-2,
    "s0": 1e-4,
    "beta_s": 0.9998,
    "beta_eta": 1e-4,
    "sigma_sq": 1e-4,
    "spectral_radius": 1.0,
    "lr": 1e-3,
}
"Stable coefficients; timings do not depend on their values"

CSV_HEADER = ("optimizer", "seq_len", "phase", "mean_s", "sem_s", "median_s", "n", "failed")


class TimingRecord(NamedTuple):
    optimizer: OptimizerId
    seq_len: int
    phase: TimingPhase
    mean_s: float
    sem_s: float
    median_s: float
    n_trials: int
    failed: bool = False
    low_confidence: bool = False
    reason: str = ""

    @classmethod
    def failure(cls, optimizer, seq_len, phase, reason):
        nan = float("nan")
        return cls(optimizer, seq_len, phase, nan, nan, nan, 0, True, True, reason)

    def row(self):
        return (
            self.optimizer.value,
            self.seq_len,
            self.phase.value,
            format_float(self.mean_s),
            format_float(self.sem_s),
            format_float(self.median_s),
            self.n_trials,
            int(self.failed),
        )


def _perturbative_iteration(optimizer, net, batch, rng, phase, hyper):
    "Build a zero-argument callable running one timed iteration"
    if optimizer.is_dopamine:
        variant = DopamineVariant.coerce(optimizer.value)
        state = DopamineState.initial(
            net,
            hyper["eta"],
            hyper["s0"],
            hyper["beta_s"],
            hyper["beta_eta"],
            hyper["sigma_sq"],
            variant=variant,
            spectral_radius=hyper["spectral_radius"],
        )
        if phase == TimingPhase.FULL:
            return lambda: dopamine_step(state, net, batch, rng)
        draw = sample_perturbation(net, state.sigma_sq, rng)
        score = compute_regret(net, draw, batch)
        return lambda: dopamine_apply(state, net, [draw], [score])
    config = WpConfig(
        hyper["eta"],
        hyper["sigma_sq"],
        spectral_radius=hyper["spectral_radius"] if optimizer == OptimizerId.SWP else None,
    )
    if phase == TimingPhase.FULL:
        return lambda: wp_step(config, net, batch, rng)
    draw = sample_perturbation(net, config.sigma_sq, rng)
    score = compute_regret(net, draw, batch)

    def update():
        updated = apply_perturbation_update(net, [draw], [score], [config.eta] * len(net.params))
        if config.spectral:
            updated = reset_recurrent(updated, config.spectral_radius)
        return updated

    return update


def _gradient_iteration(optimizer, net, batch, phase, hyper, memory_cap_bytes):
    adam = AdamState.initial(net, lr=hyper["lr"]) if optimizer == OptimizerId.ADAM else None

    def apply(grads):
        if adam is not None:
            return adam_step(adam, net, grads)
        return sgd_step(net, grads, hyper["lr"])

    if phase == TimingPhase.FULL:
        return lambda: apply(bptt(net, batch, memory_cap_bytes=memory_cap_bytes)[1])
    _, cache = bptt_forward(net, batch, memory_cap_bytes=memory_cap_bytes)
    return lambda: apply(bptt_backward(net, cache))


def _time_trials(iteration, n_trials, warmup):
    for _ in range(warmup):
        iteration()
    durations = []
    for _ in range(n_trials):
        start = time.perf_counter()
        iteration()
        durations.append(time.perf_counter() - start)
    return durations


def time_optimizer(
    optimizer,
    net,
    series,
    seq_lens,
    n_trials=5,
    phase=TimingPhase.UPDATE,
    warmup=1,
    n_samples=8,
    memory_cap_bytes=None,
    seed=0,
    hyperparams=None,
):
    """
    Time one optimizer iteration for every window length.

    Args:
        optimizer (OptimizerId, str): optimizer to time.
        net (NetworkState): recurrent network the iterations run on.
        series (array): (length, dims) series the windows are cut from; it
            must be longer than ``max(seq_lens) + n_samples``.
        seq_lens (list of int): window lengths T.
        n_trials (int): timed iterations per window length.
        phase (TimingPhase, str): "update" times the parameter update once the
            regret (or the forward pass) is known, "full" times whole iterations.
        warmup (int): untimed iterations run first.
        n_samples (int): windows per batch.
        memory_cap_bytes (int): BPTT history limit; exceeding it is recorded
            as a failure.
    Returns:
        list of TimingRecord: failures (memory, non-finite values, series too
        short) are recorded with `failed` set, never raised.
    """
    optimizer = OptimizerId.coerce(optimizer)
    phase = TimingPhase.coerce(phase)
    hyper = dict(TIMING_HYPERPARAMS, **(hyperparams or {}))
    series = np.asarray(series, dtype=np.float64)
    records = []
    for seq_len in seq_lens:
        try:
            windows = make_windows(series[: seq_len + n_samples], seq_len)
            batch = windows.to_batch(np.arange(min(n_samples, len(windows))))
            rng = make_rng(seed)
            if optimizer.is_perturbative:
                iteration = _perturbative_iteration(optimizer, net, batch, rng, phase, hyper)
            else:
                iteration = _gradient_iteration(
                    optimizer, net, batch, phase, hyper, memory_cap_bytes
                )
            durations = _time_trials(iteration, n_trials, warmup)
        except (MemoryBudgetExceededError, MemoryError) as error:
            LOGGER.warning("%s failed at T=%d: %s", optimizer.value, seq_len, error)
            records.append(TimingRecord.failure(optimizer, seq_len, phase, "memory"))
            continue
        except (NonFiniteError, FloatingPointError, EmptyWindowError) as error:
            LOGGER.warning("%s failed at T=%d: %s", optimizer.value, seq_len, error)
            records.append(TimingRecord.failure(optimizer, seq_len, phase, type(error).__name__))
            continue
        mean, sem = mean_and_sem(durations)
        record = TimingRecord(
            optimizer,
            seq_len,
            phase,
            mean,
            sem,
            float(np.median(durations)),
            len(durations),
            low_confidence=len(durations) < 2,
        )
        LOGGER.debug(
            "%s T=%d %s: %.6fs +/- %.6fs", optimizer.value, seq_len, phase.value, mean, sem
        )
        records.append(record)
    return records


def write_timing_csv(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.row())
    return path
