"""
Hyperparameter sweeps: every combination of a few configuration keys, each run
as an experiment of its own and summarized as one CSV row.

The built-in grids are the two Dopamine-2 ablations on Rössler data: the
initial values ``(s0, eta)`` and the moving-average coefficients
``(beta_s, beta_eta)``. Each point runs in
``<output_dir>/<preset>-<key>_<value>.../seed-<k>/``.
"""
import csv
import itertools
import logging
import math
from pathlib import Path
from typing import NamedTuple, Tuple

from .config import FIELD_PARSERS, ExperimentConfig, format_value
from .enums import CIMethod, RunStatus
from .errors import ConfigError
from .experiment import RunRecord, run_experiment
from .stats import summarize_runs
from .util import format_float

LOGGER = logging.getLogger(__name__)

_FULL_SIZE_GRIDS = {
    "rossler-ablation-init": {
        "s0": (1e-5, 1e-4, 1e-3, 1e-2),
        "eta": (1e-4, 1e-3, 1e-2, 1e-1),
    },
    "rossler-ablation-betas": {
        "beta_s": (0.999, 0.9998, 0.99998),
        "beta_eta": (1e-5, 1e-4, 1e-3),
    },
}
ABLATION_GRIDS = dict(
    _FULL_SIZE_GRIDS, **{f"{name}-scaled": grid for name, grid in _FULL_SIZE_GRIDS.items()}
)
"Default grid of every ablation preset, desk-scale variants included"

SUMMARY_COLUMNS = ("mean", "ci_low", "ci_high", "n", "n_diverged")


class SweepPoint(NamedTuple):
    "One grid cell and the runs of its seeds"

    values: Tuple[Tuple[str, object], ...]
    "(key, value) pairs, in grid order"
    config: ExperimentConfig
    records: Tuple[RunRecord, ...]

    @property
    def n_diverged(self):
        return sum(record.status != RunStatus.OK for record in self.records)

    def summary_row(self, method=CIMethod.NORMAL):
        losses = [record.final_loss for record in self.records if record.status == RunStatus.OK]
        row = [format_value(value) for _, value in self.values]
        if not losses:
            return row + ["nan", "nan", "nan", 0, self.n_diverged]
        summary = summarize_runs(losses, method=method, allow_single=True)
        return row + [
            format_float(summary.mean),
            format_float(summary.ci_low),
            format_float(summary.ci_high),
            summary.n_runs,
            self.n_diverged,
        ]


def parse_grid(items):
    """
    Turn ``["key=v1,v2,...", ...]`` into a grid.

    Raises:
        ConfigError: for an unknown or repeated key, or a key without values.
    """
    grid = {}
    for item in items:
        key, sep, values = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"Grid axis must look like key=v1,v2, got {item!r}")
        if key not in FIELD_PARSERS or key == "name":
            raise ConfigError(f"Unknown grid key: {key}")
        if key in grid:
            raise ConfigError(f"Grid key given twice: {key}")
        parsed = []
        for text in values.split(","):
            if not text.strip():
                continue
            try:
                parsed.append(FIELD_PARSERS[key](text.strip()))
            except (TypeError, ValueError) as error:
                raise ConfigError(f"Invalid value for {key}: {text!r}") from error
        if not parsed:
            raise ConfigError(f"Grid key {key} has no value")
        grid[key] = tuple(parsed)
    return grid


def point_name(base_name, values):
    return "-".join([base_name] + [f"{key}_{format_value(value)}" for key, value in values])


def grid_points(config: ExperimentConfig, grid):
    """
    One configuration per combination of the grid values, the last key
    varying fastest.

    Returns:
        list of tuple: ((key, value) pairs, ExperimentConfig)
    """
    if not grid:
        raise ConfigError(f"[{config.name}] empty grid")
    keys = list(grid)
    points = []
    for combination in itertools.product(*(grid[key] for key in keys)):
        values = tuple(zip(keys, combination))
        overrides = dict(values, name=point_name(config.name, values))
        points.append((values, config.with_overrides(overrides)))
    return points


def run_sweep(config: ExperimentConfig, grid=None, output_dir=None, persist=True):
    """
    Run every seed of every grid point.

    Args:
        config (ExperimentConfig): the configuration every point starts from.
        grid (dict): key -> values; defaults to the built-in grid of
            `config.name`.
    Returns:
        list of SweepPoint, in grid order.
    Raises:
        ConfigError: if no grid is given and `config.name` has none built in.
    """
    if grid is None:
        if config.name not in ABLATION_GRIDS:
            raise ConfigError(f"No built-in grid for {config.name}, pass one")
        grid = ABLATION_GRIDS[config.name]
    points = grid_points(config, grid)
    LOGGER.info("Sweeping %s over %d point(s)", config.name, len(points))
    results = []
    for values, point_config in points:
        records = tuple(run_experiment(point_config, output_dir=output_dir, persist=persist))
        point = SweepPoint(values, point_config, records)
        if point.n_diverged:
            LOGGER.warning("%s: %d seed(s) diverged", point_config.name, point.n_diverged)
        results.append(point)
    return results


def write_sweep_summary(points, path, method=CIMethod.NORMAL):
    """
    One row per grid point: the grid values, then the mean final loss of the
    completed seeds with its 95% CI, their count and the number of diverged
    seeds. A point without a completed seed gets NaN statistics.
    """
    if not points:
        raise ConfigError("No sweep point to summarize")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = tuple(key for key, _ in points[0].values)
    with path.open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(keys + SUMMARY_COLUMNS)
        for point in points:
            writer.writerow(point.summary_row(method))
    return path


def best_point(points):
    "The point with the lowest mean final loss over its completed seeds"

    def mean_loss(point):
        losses = [r.final_loss for r in point.records if r.status == RunStatus.OK]
        return math.fsum(losses) / len(losses) if losses else math.inf

    return min(points, key=mean_loss)
