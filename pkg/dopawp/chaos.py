"""
Deterministic datasets: Lorenz and Rössler trajectories, sliding-window
one-step-ahead supervision and the XOR classification set.
"""
import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .enums import Integrator, LorenzForm
from .errors import DivergenceError, EmptyWindowError, InvalidHyperparameterError
from .nn import Batch
from .util import format_float, make_rng

LOGGER = logging.getLogger(__name__)

DEFAULT_DT = 0.01
DEFAULT_INITIAL = (1.0, 0.0, 0.0)
ROSSLER_PARAMS = {"a": 0.2, "b": 0.2, "c": 5.7}
LORENZ_PARAMS = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}
XOR_CENTERS = ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0))
XOR_LABELS = (0, 1, 1, 0)
COORDINATES = ("x", "y", "z")


@dataclass(frozen=True)
class Trajectory:
    "States of a 3-d system; row 0 is the initial condition"

    system: str
    states: np.ndarray
    dt: float
    params: dict
    initial: Tuple[float, float, float]
    integrator: Integrator = Integrator.EULER

    def __len__(self):
        return self.states.shape[0]

    @property
    def times(self):
        return np.arange(len(self)) * self.dt

    def metadata(self):
        return {
            "system": self.system,
            "params": dict(self.params),
            "dt": self.dt,
            "initial": list(self.initial),
            "n_steps": len(self),
            "integrator": self.integrator.value,
        }


def _rossler_rhs(a, b, c):
    def rhs(x, y, z):
        return -(y + z), x + a * y, b + x * z - c * z

    return rhs


def _lorenz_rhs(sigma, rho, beta, form):
    if form == LorenzForm.PRINTED:
        # undefined damping constant of the printed system taken as beta
        def rhs(x, y, z):
            return sigma * (x - y), rho * x - x * z, beta * y - beta * z

    else:

        def rhs(x, y, z):
            return sigma * (y - x), x * (rho - z) - y, x * y - beta * z

    return rhs


def _euler(rhs, state, dt):
    x, y, z = state
    dx, dy, dz = rhs(x, y, z)
    return x + dt * dx, y + dt * dy, z + dt * dz


def _rk4(rhs, state, dt):
    x, y, z = state
    k1 = rhs(x, y, z)
    k2 = rhs(x + dt / 2 * k1[0], y + dt / 2 * k1[1], z + dt / 2 * k1[2])
    k3 = rhs(x + dt / 2 * k2[0], y + dt / 2 * k2[1], z + dt / 2 * k2[2])
    k4 = rhs(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2])
    return tuple(
        s + dt / 6 * (a + 2 * b + 2 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


STEPPERS = {Integrator.EULER: _euler, Integrator.RK4: _rk4}


def _integrate(system, rhs, n_steps, dt, initial, integrator):
    if n_steps < 1:
        raise InvalidHyperparameterError("n_steps", n_steps, "n_steps >= 1")
    if not dt > 0:
        raise InvalidHyperparameterError("dt", dt, "dt > 0")
    integrator = Integrator.coerce(integrator)
    stepper = STEPPERS[integrator]
    state = tuple(float(v) for v in initial)
    states = [state]
    for step in range(1, n_steps):
        state = stepper(rhs, state, dt)
        if not all(math.isfinite(v) for v in state):
            raise DivergenceError(f"{system} trajectory", step)
        states.append(state)
    return np.array(states, dtype=np.float64), state


def rossler_trajectory(
    n_steps=5000,
    dt=DEFAULT_DT,
    a=ROSSLER_PARAMS["a"],
    b=ROSSLER_PARAMS["b"],
    c=ROSSLER_PARAMS["c"],
    init=DEFAULT_INITIAL,
    integrator=Integrator.EULER,
):
    """
    Iterate the Rössler system ``x' = -(y + z), y' = x + a y, z' = b + x z - c z``.

    Raises:
        DivergenceError: if a state stops being finite.
    """
    states, _ = _integrate("rossler", _rossler_rhs(a, b, c), n_steps, dt, init, integrator)
    return Trajectory(
        "rossler", states, dt, {"a": a, "b": b, "c": c}, tuple(init), Integrator.coerce(integrator)
    )


def lorenz_trajectory(
    n_steps=5000,
    dt=DEFAULT_DT,
    sigma=LORENZ_PARAMS["sigma"],
    rho=LORENZ_PARAMS["rho"],
    beta=LORENZ_PARAMS["beta"],
    init=DEFAULT_INITIAL,
    integrator=Integrator.EULER,
    form=LorenzForm.STANDARD,
):
    """
    Iterate the Lorenz-63 system ``x' = sigma (y - x), y' = x (rho - z) - y,
    z' = x y - beta z``.

    `form="printed"` integrates the alternative right-hand side
    ``x' = sigma (x - y), y' = rho x - x z, z' = beta y - beta z`` instead,
    which does not produce the butterfly attractor; it is only kept to
    inspect that difference.

    Raises:
        DivergenceError: if a state stops being finite.
    """
    form = LorenzForm.coerce(form)
    states, _ = _integrate(
        "lorenz", _lorenz_rhs(sigma, rho, beta, form), n_steps, dt, init, integrator
    )
    return Trajectory(
        "lorenz",
        states,
        dt,
        {"sigma": sigma, "rho": rho, "beta": beta, "form": form.value},
        tuple(init),
        Integrator.coerce(integrator),
    )


@dataclass(frozen=True)
class WindowedDataset:
    """
    One-step-ahead supervision cut from a series.

    Window ``i`` holds ``series[i : i + T]``; its target is ``series[i + T]``
    and its per-step targets are ``series[i + 1 : i + T + 1]``.
    """

    inputs: np.ndarray
    targets: np.ndarray
    step_targets: np.ndarray
    lookback: int
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None)

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def normalized(self):
        return self.bounds is not None

    def to_batch(self, indices=None):
        if indices is None:
            return Batch(self.inputs, self.targets, self.step_targets)
        return Batch(self.inputs[indices], self.targets[indices], self.step_targets[indices])

    def denormalize(self, values):
        "Map normalized values back to the original units"
        if self.bounds is None:
            return np.asarray(values, dtype=np.float64)
        low, span = self.bounds
        return np.asarray(values, dtype=np.float64) * span + low


def min_max_bounds(series):
    "(low, span) of every column, a constant column gets span 1"
    low = series.min(axis=0)
    high = series.max(axis=0)
    span = np.where(high > low, high - low, 1.0)
    return low, span


def make_windows(series, lookback, normalize=False):
    """
    Cut a series into (window, next value) pairs.

    Args:
        series (array): (length,) or (length, dims) values.
        lookback (int): window length T.
        normalize (bool): min-max scale every column to [0, 1] first; the
            bounds are kept on the dataset for `denormalize`.
    Returns:
        WindowedDataset: with ``length - T`` windows.
    Raises:
        EmptyWindowError: if the series is not longer than the window.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    lookback = int(lookback)
    if lookback < 1:
        raise EmptyWindowError(f"Look-back window must hold at least one step, got {lookback}")
    if series.shape[0] <= lookback:
        raise EmptyWindowError(
            f"Series of length {series.shape[0]} is too short for a look-back window of {lookback}"
        )
    bounds = None
    if normalize:
        low, span = min_max_bounds(series)
        series = (series - low) / span
        bounds = (low, span)
    count = series.shape[0] - lookback
    windows = sliding_window_view(series, lookback, axis=0)
    inputs = np.ascontiguousarray(windows[:count].transpose(0, 2, 1))
    step_targets = np.ascontiguousarray(windows[1 : count + 1].transpose(0, 2, 1))
    targets = series[lookback:].copy()
    return WindowedDataset(inputs, targets, step_targets, lookback, bounds)


def forecasting_series(trajectory: Trajectory, coordinate=None):
    "The full 3-d state, or a single coordinate as a (length, 1) column"
    if coordinate is None:
        return trajectory.states
    index = COORDINATES.index(coordinate) if isinstance(coordinate, str) else int(coordinate)
    return trajectory.states[:, index : index + 1]


def xor_dataset(n_per_cluster=1, noise_std=0.0, seed=0):
    """
    Gaussian clusters around the four XOR corners.

    Points are ordered cluster by cluster: (0, 0), (0, 1), (1, 0), (1, 1),
    labelled 0, 1, 1, 0.

    Args:
        seed (int or numpy.random.Generator): noise stream.
    """
    if n_per_cluster < 1:
        raise InvalidHyperparameterError("n_per_cluster", n_per_cluster, ">= 1")
    if noise_std < 0:
        raise InvalidHyperparameterError("noise_std", noise_std, ">= 0")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    centers = np.repeat(np.array(XOR_CENTERS), n_per_cluster, axis=0)
    labels = np.repeat(np.array(XOR_LABELS, dtype=np.int64), n_per_cluster)
    points = centers + noise_std * rng.standard_normal(centers.shape)
    return Batch(points, labels)


def train_test_split(batch: Batch, rng, test_fraction=0.5):
    "Random split of the samples of a batch, returned as (train, test)"
    order = rng.permutation(batch.n_samples)
    n_test = int(round(batch.n_samples * test_fraction))
    return batch.subset(np.sort(order[n_test:])), batch.subset(np.sort(order[:n_test]))


def write_trajectory_csv(trajectory: Trajectory, path, bounds=None, seed=None):
    """
    Write a trajectory as CSV (header ``t,x,y,z``) next to a JSON sidecar
    holding its parameters, step size, initial state, seed and normalization
    bounds.

    Returns:
        tuple: (csv path, metadata path)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as csv_file:
        writer = csv.writer(csv_file)
        writer.writerow(("t",) + COORDINATES)
        for t, state in zip(trajectory.times, trajectory.states):
            writer.writerow([format_float(t)] + [format_float(v) for v in state])
    metadata = trajectory.metadata()
    metadata["seed"] = seed
    if bounds is not None:
        low, span = bounds
        metadata["normalization"] = {
            "low": [float(v) for v in low],
            "high": [float(l + s) for l, s in zip(low, span)],
        }
    metadata_path = path.with_suffix(".json")
    metadata_path.write_text(json.dumps(metadata, indent=2, sort_keys=True), encoding="utf-8")
    LOGGER.info("Trajectory written to %s (%d states)", path, len(trajectory))
    return path, metadata_path
