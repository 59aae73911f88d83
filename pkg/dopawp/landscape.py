"""
Random-direction loss landscapes: the loss evaluated on a 2-d slice of
parameter space spanned by two random directions around a trained network.
"""
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidHyperparameterError, NonFiniteError, ShapeMismatchError
from .nn import Batch, NetworkState, default_loss
from .util import format_float, make_rng

LOGGER = logging.getLogger(__name__)

DEFAULT_RANGE0 = (-20.0, 20.0)
DEFAULT_RANGE1 = (-15.0, 15.0)
DEFAULT_STEPS = 101
FULL_STEPS = 1000


@dataclass(frozen=True)
class LandscapeGrid:
    """
    ``losses[i, j] = L(center + alphas[i] * d1 + betas[j] * d2)``.

    Cells whose loss was not finite hold ``+inf``. The trained network sits
    at (0, 0) by construction.
    """

    alphas: np.ndarray
    betas: np.ndarray
    losses: np.ndarray
    center_checksum: str
    directions: Tuple[Tuple[np.ndarray, ...], Tuple[np.ndarray, ...]]
    seed: Optional[int]
    filter_normalized: bool = False

    @property
    def shape(self):
        return self.losses.shape

    @property
    def n_diverged(self):
        return int(np.sum(~np.isfinite(self.losses)))

    def minimum_cell(self):
        "(i, j) of the lowest loss"
        i, j = np.unravel_index(int(np.argmin(self.losses)), self.losses.shape)
        return int(i), int(j)

    def center_cell(self):
        "(i, j) of the grid point closest to (0, 0)"
        return int(np.argmin(np.abs(self.alphas))), int(np.argmin(np.abs(self.betas)))

    def write_csv(self, path):
        "Plot-ready CSV with header ``alpha,beta,loss``, one row per cell"
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as csv_file:
            writer = csv.writer(csv_file)
            writer.writerow(("alpha", "beta", "loss"))
            for i, alpha in enumerate(self.alphas):
                for j, beta in enumerate(self.betas):
                    writer.writerow(
                        (format_float(alpha), format_float(beta), format_float(self.losses[i, j]))
                    )
        return path


def random_directions(net: NetworkState, rng):
    "One standard Gaussian array per parameter matrix"
    return tuple(rng.standard_normal(p.shape) for p in net.params)


def filter_normalize(net: NetworkState, direction):
    """
    Rescale every column of every direction matrix (one output unit) to the
    norm of the matching parameter column.
    """
    normalized = []
    for param, d in zip(net.params, direction):
        param_norms = np.linalg.norm(param.data, axis=0, keepdims=True)
        d_norms = np.linalg.norm(d, axis=0, keepdims=True)
        scale = np.divide(param_norms, d_norms, out=np.zeros_like(d_norms), where=d_norms > 0)
        normalized.append(d * scale)
    return tuple(normalized)


def shifted_point(net: NetworkState, d1, d2, alpha, beta):
    "The network at ``center + alpha * d1 + beta * d2``"
    return net.with_arrays(
        [p.data + alpha * a + beta * b for p, a, b in zip(net.params, d1, d2)]
    )


def _evaluate(loss, net, batch):
    try:
        with np.errstate(over="raise", invalid="raise"):
            value = loss(net, batch)
    except (NonFiniteError, FloatingPointError, OverflowError):
        return math.inf
    return value if math.isfinite(value) else math.inf


def _check_directions(net, directions):
    for direction in directions:
        if len(direction) != len(net.params):
            raise ShapeMismatchError("landscape direction", (len(net.params),), (len(direction),))
        for param, d in zip(net.params, direction):
            if np.shape(d) != param.shape:
                raise ShapeMismatchError(f"direction for {param.name!r}", param.shape, np.shape(d))


def loss_landscape(
    net: NetworkState,
    batch: Batch,
    loss=None,
    range0=DEFAULT_RANGE0,
    range1=DEFAULT_RANGE1,
    steps0=DEFAULT_STEPS,
    steps1=DEFAULT_STEPS,
    seed=0,
    filter_normalized=False,
    directions=None,
    workers=1,
):
    """
    Evaluate the loss over a grid spanned by two random directions.

    Args:
        net (NetworkState): the center point; it is never modified.
        batch (Batch): data the loss is evaluated on.
        loss (callable): ``loss(net, batch) -> float``, defaults to the
            network's training objective.
        range0, range1 (tuple): coordinate ranges along each direction.
        steps0, steps1 (int): grid points per axis, >= 2.
        seed (int): seed of the two directions.
        filter_normalized (bool): rescale the directions column by column.
        directions (tuple): explicit (d1, d2), overriding `seed`.
        workers (int): threads sharing the rows of the grid.
    Returns:
        LandscapeGrid
    """
    if steps0 < 2 or steps1 < 2:
        raise InvalidHyperparameterError("steps", (steps0, steps1), "at least 2 points per axis")
    loss = loss or default_loss(net)
    if directions is None:
        rng = make_rng(seed)
        directions = (random_directions(net, rng), random_directions(net, rng))
    else:
        seed = None
    _check_directions(net, directions)
    d1, d2 = (tuple(np.asarray(d, dtype=np.float64) for d in direction) for direction in directions)
    if filter_normalized:
        d1, d2 = filter_normalize(net, d1), filter_normalize(net, d2)
    checksum = net.checksum()
    alphas = np.linspace(range0[0], range0[1], steps0)
    betas = np.linspace(range1[0], range1[1], steps1)
    losses = np.empty((steps0, steps1))

    def fill_row(i):
        for j, beta in enumerate(betas):
            losses[i, j] = _evaluate(loss, shifted_point(net, d1, d2, alphas[i], beta), batch)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            list(executor.map(fill_row, range(steps0)))
    else:
        for i in range(steps0):
            fill_row(i)
            if (i + 1) % 10 == 0:
                LOGGER.debug("Landscape row %d/%d done", i + 1, steps0)
    grid = LandscapeGrid(alphas, betas, losses, checksum, (d1, d2), seed, filter_normalized)
    if grid.n_diverged:
        LOGGER.warning("%d landscape cells have a non-finite loss", grid.n_diverged)
    return grid
