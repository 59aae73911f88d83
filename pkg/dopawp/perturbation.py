"""
Weight perturbation: noise sampling, regret (reward prediction error) and the
fixed-learning-rate update, with the optional spectral-radius reset of
Spectral WP.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .errors import EmptyWindowError, InvalidHyperparameterError, NonFiniteError, ShapeMismatchError
from .nn import Batch, NetworkState, default_loss, sequence_step_losses
from .spectral import RESET_TOLERANCE, spectral_reset

LOGGER = logging.getLogger(__name__)


class PerturbationDraw(NamedTuple):
    "Per-layer Gaussian noise, mirroring the shapes of the perturbed parameters"

    noise: Tuple[np.ndarray, ...]
    sigma_sq: float

    def check_matches(self, net: NetworkState):
        if len(self.noise) != len(net.params):
            raise ShapeMismatchError("perturbation", (len(net.params),), (len(self.noise),))
        for param, noise in zip(net.params, self.noise):
            if noise.shape != param.shape:
                raise ShapeMismatchError(f"perturbation of {param.name!r}", param.shape, noise.shape)

    @classmethod
    def zeros_like(cls, net: NetworkState, sigma_sq):
        return cls(tuple(np.zeros(p.shape) for p in net.params), sigma_sq)


class RegretScore(NamedTuple):
    "L(theta + xi) - L(theta), with both losses kept for logging"

    value: float
    base_loss: float
    perturbed_loss: float


@dataclass(frozen=True)
class WpConfig:
    """
    Plain weight perturbation hyperparameters.

    Setting `spectral_radius` turns the optimizer into Spectral WP: the
    recurrent matrix is rescaled to that radius every `reset_interval` steps.
    """

    eta: float
    sigma_sq: float
    spectral_radius: Optional[float] = None
    reset_interval: int = 1
    draws_per_step: int = 1

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidHyperparameterError("eta", self.eta, "eta > 0")
        check_sigma_sq(self.sigma_sq)
        if self.spectral_radius is not None and not self.spectral_radius > 0:
            raise InvalidHyperparameterError("spectral_radius", self.spectral_radius, "lambda > 0")
        if self.reset_interval < 1:
            raise InvalidHyperparameterError("reset_interval", self.reset_interval, ">= 1")
        if self.draws_per_step < 1:
            raise InvalidHyperparameterError("draws_per_step", self.draws_per_step, ">= 1")

    @property
    def spectral(self):
        return self.spectral_radius is not None


def check_sigma_sq(sigma_sq):
    if not (np.isfinite(sigma_sq) and sigma_sq > 0):
        raise InvalidHyperparameterError("sigma_sq", sigma_sq, "sigma_sq > 0")


def sample_perturbation(net: NetworkState, sigma_sq, rng: np.random.Generator):
    """
    Draw independent N(0, sigma_sq) noise for every parameter matrix.

    Draws are taken layer by layer in parameter order, so a given generator
    state always yields the same perturbation.
    """
    check_sigma_sq(sigma_sq)
    sigma = math.sqrt(sigma_sq)
    return PerturbationDraw(
        tuple(sigma * rng.standard_normal(p.shape) for p in net.params), float(sigma_sq)
    )


def _checked(value, what):
    if not math.isfinite(value):
        raise NonFiniteError(what, value)
    return value


def regret(net: NetworkState, draw: PerturbationDraw, batch: Batch, loss=None):
    """
    Reward prediction error of one perturbation: ``L(theta + xi) - L(theta)``.

    Exactly two loss evaluations are made; `net` is not modified.

    Args:
        loss (callable): ``loss(net, batch) -> float``. Defaults to the
            network's training objective.
    Raises:
        NonFiniteError: if either loss is not finite.
    """
    draw.check_matches(net)
    loss = loss or default_loss(net)
    base = _checked(loss(net, batch), "loss")
    perturbed = _checked(loss(net.shifted(draw.noise), batch), "perturbed loss")
    return RegretScore(perturbed - base, base, perturbed)


def truncated_regret(net: NetworkState, draw: PerturbationDraw, batch: Batch):
    """
    Regret of a recurrent network summed over the window:
    ``sum_tau (L_tau(theta + xi) - L_tau(theta))`` with per-step MSE losses.

    Raises:
        EmptyWindowError: if the window has no step.
    """
    draw.check_matches(net)
    if not batch.is_sequence or batch.lookback == 0:
        raise EmptyWindowError("Truncated regret needs a sequence window of at least one step")
    base_steps = sequence_step_losses(net, batch)
    perturbed_steps = sequence_step_losses(net.shifted(draw.noise), batch)
    value = _checked(float(np.sum(perturbed_steps - base_steps)), "regret")
    return RegretScore(
        value,
        _checked(float(np.sum(base_steps)), "loss"),
        _checked(float(np.sum(perturbed_steps)), "perturbed loss"),
    )


def compute_regret(net: NetworkState, draw: PerturbationDraw, batch: Batch, loss=None):
    "Truncated regret for sequence windows without an explicit loss, plain regret otherwise"
    if loss is None and batch.is_sequence:
        return truncated_regret(net, draw, batch)
    return regret(net, draw, batch, loss)


def apply_perturbation_update(net: NetworkState, draws, scores, etas):
    """
    ``theta_l <- theta_l - eta_l * mean_k(R_k * xi_k_l) / sigma_sq`` for every layer.

    With a single draw the coefficient ``eta_l * R / sigma_sq`` multiplies the
    noise directly. Every layer is updated from the same pre-step parameters.
    """
    sigma_sq = draws[0].sigma_sq
    arrays = []
    for index, param in enumerate(net.params):
        eta = etas[index]
        if len(draws) == 1:
            step = (eta * scores[0].value / sigma_sq) * draws[0].noise[index]
        else:
            direction = sum(s.value * d.noise[index] for d, s in zip(draws, scores)) / len(draws)
            step = (eta / sigma_sq) * direction
        updated = param.data - step
        if not np.isfinite(updated).all():
            raise NonFiniteError(f"parameters of {param.name}")
        arrays.append(updated)
    return net.with_arrays(arrays)


def wp_update(net: NetworkState, draw: PerturbationDraw, score, eta):
    """
    Weight perturbation update ``theta <- theta - (eta / sigma_sq) * R * xi``,
    applied to all layers simultaneously.

    Args:
        score (RegretScore or float): the regret R of `draw`.
        eta (float): learning rate, > 0.
    """
    if not eta > 0:
        raise InvalidHyperparameterError("eta", eta, "eta > 0")
    draw.check_matches(net)
    if not isinstance(score, RegretScore):
        score = RegretScore(float(score), math.nan, math.nan)
    return apply_perturbation_update(net, [draw], [score], [eta] * len(net.params))


def reset_recurrent(net: NetworkState, spectral_target, tol=RESET_TOLERANCE):
    "Rescale the recurrent matrix of `net` (if any) to the target spectral radius"
    index = net.recurrent_index
    if index is None:
        return net
    params = list(net.params)
    params[index] = spectral_reset(params[index], spectral_target, tol=tol)
    return NetworkState(net.spec, tuple(params))


def wp_step(config: WpConfig, net: NetworkState, batch: Batch, rng, step=0, loss=None):
    """
    One plain (or Spectral) WP iteration: sample, measure the regret, update.

    Returns:
        tuple: (updated NetworkState, RegretScore of the first draw)
    """
    draws, scores = [], []
    for _ in range(config.draws_per_step):
        draw = sample_perturbation(net, config.sigma_sq, rng)
        draws.append(draw)
        scores.append(compute_regret(net, draw, batch, loss))
    net = apply_perturbation_update(net, draws, scores, [config.eta] * len(net.params))
    if config.spectral and (step + 1) % config.reset_interval == 0:
        net = reset_recurrent(net, config.spectral_radius)
    return net, scores[0]
