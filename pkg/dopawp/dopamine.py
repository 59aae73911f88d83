"""
Dopamine optimizers: weight perturbation whose per-layer learning rates are
driven by a moving average of the regret.

One step (`dopamine_step`):

1. sample noise for every layer;
2. measure one global regret R (two forward computations);
3. advance the auxiliary variable ``s <- beta_s * s - (1 - beta_s) * R``;
4. advance every layer's learning rate (Dopamine-1 tracks ``-s``,
   Dopamine-2 decays towards ``+s``);
5. update every layer with ``theta_l <- theta_l - eta_l * R * xi_l / sigma_sq``;
6. rescale the recurrent matrix to the target spectral radius, if any.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from .enums import DopamineVariant
from .errors import InvalidHyperparameterError, NonFiniteError
from .nn import Batch, NetworkState
from .perturbation import (
    apply_perturbation_update,
    check_sigma_sq,
    compute_regret,
    reset_recurrent,
    sample_perturbation,
)

LOGGER = logging.getLogger(__name__)


def _check_unit_interval(name, value):
    if not 0.0 <= value <= 1.0:
        raise InvalidHyperparameterError(name, value, f"0 <= {name} <= 1")


def dopamine_s_update(s_prev, regret_value, beta_s):
    "``s_t = beta_s * s_{t-1} - (1 - beta_s) * R_t``"
    _check_unit_interval("beta_s", beta_s)
    return beta_s * s_prev - (1.0 - beta_s) * float(regret_value)


def dopamine1_eta(eta_prev, s, beta_eta, eta_floor=None):
    "``eta_t = (1 - beta_eta) * eta_{t-1} - beta_eta * s_t``, optionally floored"
    _check_unit_interval("beta_eta", beta_eta)
    eta = (1.0 - beta_eta) * eta_prev - beta_eta * s
    if eta_floor is not None:
        eta = max(eta, eta_floor)
    return eta


def dopamine2_eta(eta_prev, s, beta_eta, eta_floor=None):
    "``eta_t = (1 - beta_eta) * eta_{t-1} + beta_eta * s_t``, optionally floored"
    _check_unit_interval("beta_eta", beta_eta)
    eta = (1.0 - beta_eta) * eta_prev + beta_eta * s
    if eta_floor is not None:
        eta = max(eta, eta_floor)
    return eta


ETA_RULES = {
    DopamineVariant.TRACK: dopamine1_eta,
    DopamineVariant.DECAY: dopamine2_eta,
}


@dataclass(frozen=True)
class DopamineState:
    """
    Optimizer state of one training run.

    `eta` holds one learning rate per parameter matrix; `initial` builds it
    from a shared starting value. `s_per_layer` advances `s` once per layer
    instead of once per step.
    """

    s: float
    eta: Tuple[float, ...]
    beta_s: float
    beta_eta: float
    sigma_sq: float
    variant: DopamineVariant = DopamineVariant.DECAY
    spectral_radius: Optional[float] = None
    reset_interval: int = 1
    eta_floor: Optional[float] = None
    draws_per_step: int = 1
    s_per_layer: bool = False
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", DopamineVariant.coerce(self.variant))
        object.__setattr__(self, "eta", tuple(float(e) for e in self.eta))
        if not 0.0 < self.beta_s < 1.0:
            raise InvalidHyperparameterError("beta_s", self.beta_s, "0 < beta_s < 1")
        # beta_eta = 0 keeps eta fixed, which is plain WP
        if not 0.0 <= self.beta_eta < 1.0:
            raise InvalidHyperparameterError("beta_eta", self.beta_eta, "0 <= beta_eta < 1")
        check_sigma_sq(self.sigma_sq)
        if self.spectral_radius is not None and not self.spectral_radius > 0:
            raise InvalidHyperparameterError("spectral_radius", self.spectral_radius, "lambda > 0")
        if self.reset_interval < 1:
            raise InvalidHyperparameterError("reset_interval", self.reset_interval, ">= 1")
        if self.draws_per_step < 1:
            raise InvalidHyperparameterError("draws_per_step", self.draws_per_step, ">= 1")
        if not all(math.isfinite(e) for e in self.eta) or not math.isfinite(self.s):
            raise InvalidHyperparameterError("eta/s", (self.eta, self.s), "finite values")

    @classmethod
    def initial(cls, net: NetworkState, eta0, s0, beta_s, beta_eta, sigma_sq, **kwargs):
        "A fresh state with the same initial learning rate for every layer"
        if beta_eta >= beta_s:
            LOGGER.warning(
                "beta_eta=%g >= beta_s=%g: the learning rate reacts faster than the regret average",
                beta_eta,
                beta_s,
            )
        return cls(
            s=float(s0),
            eta=(float(eta0),) * len(net.params),
            beta_s=beta_s,
            beta_eta=beta_eta,
            sigma_sq=sigma_sq,
            **kwargs,
        )

    @property
    def spectral(self):
        return self.spectral_radius is not None


def advance_rates(state: DopamineState, regret_value):
    """
    Advance s and the per-layer learning rates from one regret value.

    Returns:
        DopamineState: with the new s, eta and step counter.
    """
    rule = ETA_RULES[state.variant]
    s = state.s
    etas = []
    if state.s_per_layer:
        for eta in state.eta:
            s = dopamine_s_update(s, regret_value, state.beta_s)
            etas.append(rule(eta, s, state.beta_eta, state.eta_floor))
    else:
        s = dopamine_s_update(s, regret_value, state.beta_s)
        etas = [rule(eta, s, state.beta_eta, state.eta_floor) for eta in state.eta]
    if not math.isfinite(s) or not all(math.isfinite(e) for e in etas):
        raise NonFiniteError("learning rates", (etas, s))
    return replace(state, s=s, eta=tuple(etas), step=state.step + 1)


def dopamine_apply(state: DopamineState, net: NetworkState, draws, scores):
    """
    The update phase of a step, once the regret is known.

    Touches only parameters and optimizer state: its cost depends on the
    parameter count, never on the length of the sequence window.

    Returns:
        tuple: (DopamineState, NetworkState)
    """
    mean_regret = sum(score.value for score in scores) / len(scores)
    new_state = advance_rates(state, mean_regret)
    net = apply_perturbation_update(net, draws, scores, new_state.eta)
    if state.spectral and new_state.step % state.reset_interval == 0:
        net = reset_recurrent(net, state.spectral_radius)
    return new_state, net


def dopamine_step(state: DopamineState, net: NetworkState, batch: Batch, rng, loss=None):
    """
    One Dopamine iteration.

    Args:
        state (DopamineState): optimizer state before the step.
        net (NetworkState): parameters before the step.
        batch (Batch): data the regret is measured on; sequence windows use
            the truncated (window-summed) regret unless `loss` is given.
        rng (numpy.random.Generator): perturbation stream.
        loss (callable): optional ``loss(net, batch) -> float``.
    Returns:
        tuple: (DopamineState, NetworkState, RegretScore of the first draw)
    """
    if len(state.eta) != len(net.params):
        raise InvalidHyperparameterError(
            "eta", state.eta, f"one learning rate per parameter matrix ({len(net.params)})"
        )
    draws, scores = [], []
    for _ in range(state.draws_per_step):
        draw = sample_perturbation(net, state.sigma_sq, rng)
        draws.append(draw)
        scores.append(compute_regret(net, draw, batch, loss))
    new_state, new_net = dopamine_apply(state, net, draws, scores)
    return new_state, new_net, scores[0]
