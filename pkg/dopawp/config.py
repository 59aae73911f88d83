"""
Experiment configuration: a validated dataclass, read from and written to INI
files where every section is one named experiment.

A section may name another one with ``extends = <section>``; its keys are
then layered over the keys of that section.
"""
import configparser
import io
import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional

from .enums import Head, OptimizerId, Task
from .errors import ConfigError, UnknownPresetError

LOGGER = logging.getLogger(__name__)

PRESETS_PATH = Path(__file__).parent / "presets.ini"

DEFAULT_HIDDEN_DIMS = {Task.XOR: 4, Task.LORENZ: 512, Task.ROSSLER: 512}


@dataclass(frozen=True)
class ExperimentConfig:
    "Everything needed to re-derive a run, given its seed"

    name: str = "custom"
    task: Task = Task.XOR
    optimizer: OptimizerId = OptimizerId.DOPAMINE2
    # optimizer hyperparameters, `eta` is the (initial) learning rate of every optimizer
    eta: float = 1e-2
    s0: Optional[float] = None
    beta_s: Optional[float] = None
    beta_eta: Optional[float] = None
    sigma_sq: Optional[float] = None
    spectral_radius: Optional[float] = None
    reset_interval: int = 1
    eta_floor: Optional[float] = None
    draws_per_step: int = 1
    s_per_layer: bool = False
    clip_norm: Optional[float] = None
    # model
    hidden_dim: Optional[int] = None
    use_bias: bool = True
    head: Head = Head.SIGMOID_SOFTMAX
    init_scale: float = 1.0
    # training
    epochs: int = 1000
    batch_size: Optional[int] = None
    log_every: int = 100
    # forecasting data
    lookback: int = 32
    series_length: int = 5000
    dt: float = 0.01
    coordinate: Optional[str] = None
    normalize: bool = True
    # classification data
    n_per_cluster: int = 50
    noise_std: float = 0.1
    test_fraction: float = 0.5
    # runs
    n_seeds: int = 1
    base_seed: int = 0
    output_dir: str = "runs"
    workers: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "task", Task.coerce(self.task))
            object.__setattr__(self, "optimizer", OptimizerId.coerce(self.optimizer))
            object.__setattr__(self, "head", Head.coerce(self.head))
        except (TypeError, ValueError) as error:
            raise ConfigError(f"[{self.name}] {error}") from error
        if self.hidden_dim is None:
            object.__setattr__(self, "hidden_dim", DEFAULT_HIDDEN_DIMS[self.task])
        self._validate()

    def _fail(self, message):
        raise ConfigError(f"[{self.name}] {message}")

    def _validate(self):
        for key in ("epochs", "n_seeds", "hidden_dim", "lookback", "workers", "log_every"):
            if getattr(self, key) < 1:
                self._fail(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.reset_interval < 1 or self.draws_per_step < 1:
            self._fail("reset_interval and draws_per_step must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            self._fail(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.eta > 0:
            self._fail(f"eta must be > 0, got {self.eta}")
        if self.clip_norm is not None and not self.clip_norm > 0:
            self._fail(f"clip_norm must be > 0, got {self.clip_norm}")
        optimizer = self.optimizer
        if optimizer.is_perturbative:
            if self.sigma_sq is None or not self.sigma_sq > 0:
                self._fail(f"{optimizer.value} needs sigma_sq > 0, got {self.sigma_sq}")
        if optimizer.is_dopamine:
            if self.s0 is None or self.beta_s is None or self.beta_eta is None:
                self._fail(f"{optimizer.value} needs s0, beta_s and beta_eta")
            if not 0 < self.beta_s < 1:
                self._fail(f"beta_s must lie in (0, 1), got {self.beta_s}")
            if not 0 <= self.beta_eta < 1:
                self._fail(f"beta_eta must lie in [0, 1), got {self.beta_eta}")
        if optimizer == OptimizerId.SWP and self.spectral_radius is None:
            self._fail("swp needs a spectral_radius")
        if self.spectral_radius is not None:
            if not self.spectral_radius > 0:
                self._fail(f"spectral_radius must be > 0, got {self.spectral_radius}")
            if not self.task.is_forecasting:
                self._fail("spectral_radius only applies to recurrent networks")
        if self.task.is_forecasting:
            if self.series_length <= self.lookback:
                self._fail("series_length must exceed lookback")
            if not self.dt > 0:
                self._fail(f"dt must be > 0, got {self.dt}")
            if self.coordinate not in (None, "x", "y", "z"):
                self._fail(f"coordinate must be x, y or z, got {self.coordinate}")
        else:
            if not self.head.is_probabilistic:
                self._fail("xor needs a probabilistic head")
            if self.n_per_cluster < 1 or self.noise_std < 0:
                self._fail("n_per_cluster must be >= 1 and noise_std >= 0")
            if not 0 <= self.test_fraction < 1:
                self._fail(f"test_fraction must lie in [0, 1), got {self.test_fraction}")

    def with_overrides(self, overrides):
        """
        A copy with some keys replaced.

        Args:
            overrides (dict or list of "key=value" strings): string values are
                parsed like INI values.
        """
        if not isinstance(overrides, dict):
            overrides = parse_overrides(overrides)
        values = {}
        for key, value in overrides.items():
            if key not in FIELD_PARSERS:
                self._fail(f"unknown key: {key}")
            try:
                values[key] = FIELD_PARSERS[key](value) if isinstance(value, str) else value
            except (TypeError, ValueError) as error:
                raise ConfigError(f"[{self.name}] invalid value for {key}: {value!r}") from error
        return replace(self, **values)

    def to_dict(self):
        values = asdict(self)
        for key in ("task", "optimizer", "head"):
            values[key] = values[key].value
        return values

    def to_ini(self):
        "The whole configuration as a one-section INI document"
        parser = configparser.ConfigParser(interpolation=None)
        parser[self.name] = {
            key: format_value(value) for key, value in self.to_dict().items() if key != "name"
        }
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def write(self, path):
        Path(path).write_text(self.to_ini(), encoding="utf-8")


def format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _optional(parse):
    def parser(text):
        text = text.strip()
        if text.lower() in ("", "none"):
            return None
        return parse(text)

    return parser


def _boolean(text):
    lowered = text.strip().lower()
    if lowered in ("1", "yes", "true", "on"):
        return True
    if lowered in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"Not a boolean: {text!r}")


FIELD_PARSERS = {
    "name": str.strip,
    "task": Task.coerce,
    "optimizer": OptimizerId.coerce,
    "eta": float,
    "s0": _optional(float),
    "beta_s": _optional(float),
    "beta_eta": _optional(float),
    "sigma_sq": _optional(float),
    "spectral_radius": _optional(float),
    "reset_interval": int,
    "eta_floor": _optional(float),
    "draws_per_step": int,
    "s_per_layer": _boolean,
    "clip_norm": _optional(float),
    "hidden_dim": _optional(int),
    "use_bias": _boolean,
    "head": Head.coerce,
    "init_scale": float,
    "epochs": int,
    "batch_size": _optional(int),
    "log_every": int,
    "lookback": int,
    "series_length": int,
    "dt": float,
    "coordinate": _optional(str.strip),
    "normalize": _boolean,
    "n_per_cluster": int,
    "noise_std": float,
    "test_fraction": float,
    "n_seeds": int,
    "base_seed": int,
    "output_dir": str.strip,
    "workers": int,
}


def parse_overrides(items):
    """Turn ``["key=value", ...]`` into a dict"""
    overrides = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"Override must look like key=value, got {item!r}")
        overrides[key.strip()] = value
    return overrides


def _read_parser(path):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as ini_file:
            parser.read_file(ini_file)
    except (OSError, configparser.Error) as error:
        raise ConfigError(f"Cannot read {path}: {error}") from error
    return parser


def _section_items(parser, name, seen=()):
    if name in seen:
        raise ConfigError(f"Circular 'extends' chain: {' -> '.join(seen + (name,))}")
    items = dict(parser[name])
    parent = items.pop("extends", None)
    if parent is None:
        return items
    if not parser.has_section(parent):
        raise ConfigError(f"[{name}] extends unknown section {parent!r}")
    merged = _section_items(parser, parent, seen + (name,))
    merged.update(items)
    return merged


def config_from_items(name, items):
    values = {"name": name}
    for key, text in items.items():
        if key not in FIELD_PARSERS:
            raise ConfigError(f"[{name}] unknown key: {key}")
        try:
            values[key] = FIELD_PARSERS[key](text)
        except (TypeError, ValueError) as error:
            raise ConfigError(f"[{name}] invalid value for {key}: {text!r}") from error
    return ExperimentConfig(**values)


def load_config(path, section=None):
    """
    Read one experiment from an INI file.

    Args:
        section (str): section to read; may be omitted when the file holds
            a single section.
    Raises:
        ConfigError
    """
    parser = _read_parser(path)
    sections = parser.sections()
    if section is None:
        if len(sections) != 1:
            raise ConfigError(f"{path} holds {len(sections)} sections, pick one of: {sections}")
        section = sections[0]
    if not parser.has_section(section):
        raise ConfigError(f"{path} has no section {section!r}")
    return config_from_items(section, _section_items(parser, section))


def _is_preset(section):
    return not section.startswith("_")


def preset_names():
    "Names of the presets, in file order"
    return [name for name in _read_parser(PRESETS_PATH).sections() if _is_preset(name)]


def preset(name):
    """
    The experiment configuration of a named preset.

    Raises:
        UnknownPresetError
    """
    parser = _read_parser(PRESETS_PATH)
    if not _is_preset(name) or not parser.has_section(name):
        raise UnknownPresetError(name, [s for s in parser.sections() if _is_preset(s)])
    LOGGER.debug("Loading preset %s", name)
    return config_from_items(name, _section_items(parser, name))
