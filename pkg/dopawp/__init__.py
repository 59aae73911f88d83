#!/usr/bin/env python
from .cli import DOPAWP_VERSION as _DOPAWP_VERSION
from .config import ExperimentConfig, load_config, preset, preset_names
from .dopamine import DopamineState, dopamine_apply, dopamine_step
from .enums import OptimizerId, Task
from .errors import DopaWPException
from .experiment import RunRecord, compare, run_experiment
from .nn import Batch, MlpSpec, NetworkState, ParamMatrix, RnnSpec, init_network
from .perturbation import WpConfig, regret, sample_perturbation, wp_step, wp_update
from .spectral import spectral_radius, spectral_reset

DOPAWP_VERSION = _DOPAWP_VERSION
"Current dopawp version, also available via `__version__`"

__license__ = "LGPL 3.0"

__version__ = DOPAWP_VERSION


__all__ = [
    # metadata
    "__version__",
    "__license__",
    # Networks
    "Batch",
    "MlpSpec",
    "NetworkState",
    "ParamMatrix",
    "RnnSpec",
    "init_network",
    # Optimizers
    "DopamineState",
    "WpConfig",
    "dopamine_apply",
    "dopamine_step",
    "regret",
    "sample_perturbation",
    "spectral_radius",
    "spectral_reset",
    "wp_step",
    "wp_update",
    # Experiments
    "ExperimentConfig",
    "OptimizerId",
    "RunRecord",
    "Task",
    "compare",
    "load_config",
    "preset",
    "preset_names",
    "run_experiment",
    # Errors
    "DopaWPException",
    # Constants
    "DOPAWP_VERSION",
]
