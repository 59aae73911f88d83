"""
Multi-seed experiment runner, run-directory persistence and run comparison.

Every run lives in ``<output_dir>/<experiment name>/seed-<k>/`` and holds:

* ``config.ini``: the effective configuration (with the seed it ran with);
* ``metadata.json``: seed, status, losses, checksum, timings;
* ``loss_curve.csv``: ``epoch,loss``;
* ``traces.csv`` (perturbative optimizers): ``epoch,regret[,s,eta_<layer>...]``,
  the regret of the epoch and the optimizer state after it;
* ``params.npz``: the final parameters, keyed by layout name;
* ``predictions.csv`` (forecasting) or ``decision_boundary.csv`` (XOR).
"""
import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .config import ExperimentConfig, load_config
from .enums import CIMethod, RunStatus, Task
from .errors import ConfigError, MismatchedTasksError
from .nn import NetworkState, decision_grid, rnn_forward
from .stats import summarize_runs
from .training import build_spec, build_task_data, train
from .util import format_float, split_seed

LOGGER = logging.getLogger(__name__)

SUMMARY_HEADER = ("optimizer", "task", "mean", "ci_low", "ci_high", "n", "degenerate")


@dataclass(frozen=True)
class RunRecord:
    "One seed of an experiment"

    config: ExperimentConfig
    seed: int
    losses: Tuple[float, ...]
    checksum: str
    status: RunStatus
    initial_loss: float
    final_loss: float
    wall_time_s: float
    test_loss: Optional[float] = None
    canonical_accuracy: Optional[float] = None
    diverged_at: Optional[int] = None
    message: str = ""
    trace_names: Tuple[str, ...] = ()
    traces: Tuple[Tuple[float, ...], ...] = field(default=(), repr=False)
    solved_at: Optional[int] = None
    run_dir: Optional[Path] = field(default=None, compare=False)

    @property
    def step_time_s(self):
        return self.wall_time_s / len(self.losses) if self.losses else math.nan

    def metadata(self):
        return {
            "name": self.config.name,
            "task": self.config.task.value,
            "optimizer": self.config.optimizer.value,
            "seed": self.seed,
            "status": self.status.value,
            "epochs_completed": len(self.losses),
            "initial_loss": self.initial_loss,
            "final_loss": None if math.isnan(self.final_loss) else self.final_loss,
            "test_loss": self.test_loss,
            "canonical_accuracy": self.canonical_accuracy,
            "solved_at": self.solved_at,
            "diverged_at": self.diverged_at,
            "message": self.message,
            "params_checksum": self.checksum,
            "wall_time_s": self.wall_time_s,
            "step_time_s": self.step_time_s,
            "loss_units": "normalized per-step mse" if self.config.task.is_forecasting else "bce",
        }


def run_dir_of(config: ExperimentConfig, seed, output_dir=None):
    return Path(output_dir or config.output_dir) / config.name / f"seed-{seed}"


def write_loss_curve(losses, path):
    with Path(path).open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(("epoch", "loss"))
        for epoch, loss in enumerate(losses, start=1):
            writer.writerow((epoch, format_float(loss)))


def write_traces(names, traces, path):
    with Path(path).open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(("epoch",) + tuple(names))
        for epoch, values in enumerate(traces, start=1):
            writer.writerow([epoch] + [format_float(v) for v in values])


def write_predictions(net: NetworkState, data, dt, path):
    "Final-step readout of every window next to its true next value, in original units"
    windows = data.windows
    predictions = rnn_forward(net, windows.to_batch()).predictions[:, -1, :]
    truth = windows.denormalize(windows.targets)
    predictions = windows.denormalize(predictions)
    dims = truth.shape[1]
    names = ("x", "y", "z")[:dims] if dims > 1 else ("x",)
    with Path(path).open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(("t",) + tuple(f"true_{n}" for n in names) + tuple(f"pred_{n}" for n in names))
        for i in range(truth.shape[0]):
            t = (i + windows.lookback) * dt
            writer.writerow(
                [format_float(t)]
                + [format_float(v) for v in truth[i]]
                + [format_float(v) for v in predictions[i]]
            )


def write_decision_boundary(net: NetworkState, path, resolution=101):
    x0, x1, probs = decision_grid(net, resolution=resolution)
    with Path(path).open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(("x0", "x1", "p1"))
        for i, a in enumerate(x0):
            for j, b in enumerate(x1):
                writer.writerow((format_float(a), format_float(b), format_float(probs[i, j])))


def save_params(net: NetworkState, path):
    np.savez(path, **{p.name: p.data for p in net.params})


def persist_run(record: RunRecord, net: NetworkState, data, run_dir):
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    config = record.config.with_overrides({"base_seed": record.seed, "n_seeds": 1})
    config.write(run_dir / "config.ini")
    write_loss_curve(record.losses, run_dir / "loss_curve.csv")
    if record.trace_names:
        write_traces(record.trace_names, record.traces, run_dir / "traces.csv")
    (run_dir / "metadata.json").write_text(
        json.dumps(record.metadata(), indent=2, sort_keys=True), encoding="utf-8"
    )
    save_params(net, run_dir / "params.npz")
    if record.status == RunStatus.OK:
        if config.task.is_forecasting:
            write_predictions(net, data, config.dt, run_dir / "predictions.csv")
        else:
            write_decision_boundary(net, run_dir / "decision_boundary.csv")


def run_seed(config: ExperimentConfig, seed, output_dir=None, persist=True):
    result, data = train(config, seed)
    record = RunRecord(
        config=config,
        seed=seed,
        losses=result.losses,
        checksum=result.net.checksum(),
        status=result.status,
        initial_loss=result.initial_loss,
        final_loss=result.final_loss,
        wall_time_s=result.wall_time_s,
        test_loss=result.test_loss,
        canonical_accuracy=result.canonical_accuracy,
        diverged_at=result.diverged_at,
        message=result.message,
        trace_names=result.trace_names,
        traces=result.traces,
        solved_at=result.solved_at,
    )
    if persist:
        run_dir = run_dir_of(config, seed, output_dir)
        persist_run(record, result.net, data, run_dir)
        record = replace(record, run_dir=run_dir)
    return record


def run_experiment(config: ExperimentConfig, output_dir=None, persist=True):
    """
    Run every seed of an experiment.

    Seeds are ``base_seed .. base_seed + n_seeds - 1``; they run in
    `config.workers` threads, each owning its run directory. A diverging seed
    is recorded with its status and never stops the others.

    Returns:
        list of RunRecord, in seed order.
    """
    seeds = range(config.base_seed, config.base_seed + config.n_seeds)
    LOGGER.info(
        "Running %s: %s on %s, %d seed(s)",
        config.name,
        config.optimizer.value,
        config.task.value,
        config.n_seeds,
    )
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            records = list(
                executor.map(lambda seed: run_seed(config, seed, output_dir, persist), seeds)
            )
    else:
        records = [run_seed(config, seed, output_dir, persist) for seed in seeds]
    n_diverged = sum(record.status == RunStatus.DIVERGED for record in records)
    if n_diverged:
        LOGGER.warning("%s: %d of %d seed(s) diverged", config.name, n_diverged, len(records))
    return records


def load_run(run_dir):
    """
    Read back a persisted run.

    Returns:
        tuple: (ExperimentConfig, metadata dict, NetworkState)
    """
    run_dir = Path(run_dir)
    if not (run_dir / "metadata.json").is_file():
        raise ConfigError(f"{run_dir} is not a run directory")
    config = load_config(run_dir / "config.ini")
    metadata = json.loads((run_dir / "metadata.json").read_text(encoding="utf-8"))
    spec = build_spec(config)
    with np.load(run_dir / "params.npz") as arrays:
        net = NetworkState.from_arrays(spec, [arrays[entry.name] for entry in spec.layout()])
    return config, metadata, net


def landscape_batch(config: ExperimentConfig, seed, split="train"):
    "The data a run was trained (or tested) on, regenerated from its seed"
    data = build_task_data(config, split_seed(seed).data)
    if split == "train":
        return data.train
    if split == "test":
        if data.test is None:
            raise ConfigError(f"{config.name} has no test split")
        return data.test
    raise ConfigError(f"Unknown split: {split}")


def _expand_run_dirs(paths):
    "Run directories, looking one level down into experiment directories"
    run_dirs = []
    for path in map(Path, paths):
        if (path / "metadata.json").is_file():
            run_dirs.append(path)
            continue
        children = sorted(p for p in path.glob("*/metadata.json"))
        if not children:
            raise ConfigError(f"No run found in {path}")
        run_dirs.extend(child.parent for child in children)
    return run_dirs


def compare(paths, output=None, method=CIMethod.NORMAL):
    """
    Mean final loss and 95% CI per optimizer over completed runs.

    Args:
        paths (list): run directories or experiment directories holding them.
        output (str, Path): optional CSV path (header
            ``optimizer,task,mean,ci_low,ci_high,n,degenerate``;
            `degenerate` is 1 when a single run collapsed the interval).
    Returns:
        dict: optimizer name -> RunSummary, in first-seen order.
    Raises:
        MismatchedTasksError: if the runs belong to different tasks.
    """
    run_dirs = _expand_run_dirs(paths)
    tasks, losses = set(), {}
    for run_dir in run_dirs:
        metadata = json.loads((run_dir / "metadata.json").read_text(encoding="utf-8"))
        tasks.add(metadata["task"])
        if metadata["status"] != RunStatus.OK.value or metadata["final_loss"] is None:
            LOGGER.warning("Skipping diverged run %s", run_dir)
            losses.setdefault(metadata["optimizer"], [])
            continue
        losses.setdefault(metadata["optimizer"], []).append(metadata["final_loss"])
    if len(tasks) > 1:
        raise MismatchedTasksError(f"Runs belong to different tasks: {sorted(tasks)}")
    task = Task.coerce(tasks.pop())
    summaries = {}
    for optimizer, values in losses.items():
        if not values:
            LOGGER.warning("No completed run for %s", optimizer)
            continue
        summaries[optimizer] = summarize_runs(values, method=method, allow_single=True)
    if output is not None:
        output = Path(output)
        output.parent.mkdir(parents=True, exist_ok=True)
        with output.open("w", newline="", encoding="utf-8") as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(SUMMARY_HEADER)
            for optimizer, summary in summaries.items():
                writer.writerow(
                    (
                        optimizer,
                        task.value,
                        format_float(summary.mean),
                        format_float(summary.ci_low),
                        format_float(summary.ci_high),
                        summary.n_runs,
                        int(summary.degenerate),
                    )
                )
    return summaries
