"""Run configuration: defaults, INI-style files with dotted sections, and overrides.

Every parameter has a dotted name ``<section>.<key>``, for example
``neuron.exc.tau_mem`` or ``run.epochs``. Config files group keys under
``[section]`` headers::

    [synapse]
    eta = 0.01

    [run]
    n_neurons = 400
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .assignment import SCHEMES
from .errors import ConfigError
from .network import NeuronParams, SynapseParams
from .signal import EncodingConfig


@dataclass(frozen=True)
class RunSettings:
    image_width: int = 28
    image_height: int = 28
    patch_width: int = 7
    patch_height: int = 7
    n_neurons: int = 400
    epochs: int = 60
    gamma: float = 0.02
    scheme: str = "weighted_prob"
    seed: int = 0
    label_passes: int = 1
    shuffle: bool = True
    retry_min_spikes: int = 5
    retry_boost: float = 32.0
    max_retries: int = 10

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("run.epochs", f"must be >= 1, got {self.epochs}")
        if self.n_neurons < 1:
            raise ConfigError("run.n_neurons", f"must be >= 1, got {self.n_neurons}")
        if self.image_width < 1 or self.image_height < 1:
            raise ConfigError("run.image_width", "image size must be positive")
        if self.image_width % self.patch_width or self.image_height % self.patch_height:
            raise ConfigError("run.patch_width", "patch size must tile the image size")
        if not 0 < self.gamma <= 1:
            raise ConfigError("run.gamma", f"must lie in (0, 1], got {self.gamma}")
        if self.scheme not in SCHEMES:
            raise ConfigError("run.scheme", f"must be one of {', '.join(SCHEMES)}")
        if self.label_passes < 1:
            raise ConfigError("run.label_passes", f"must be >= 1, got {self.label_passes}")
        if self.retry_min_spikes < 0 or self.max_retries < 0 or self.retry_boost < 0:
            raise ConfigError("run.retry_min_spikes", "retry settings must be >= 0")


_SECTIONS = {
    "neuron.exc": "exc",
    "neuron.inh": "inh",
    "synapse": "synapse",
    "encoding": "encoding",
    "run": "run",
}


@dataclass(frozen=True)
class RunConfig:
    exc: NeuronParams = field(default_factory=NeuronParams.excitatory)
    inh: NeuronParams = field(default_factory=NeuronParams.inhibitory)
    synapse: SynapseParams = field(default_factory=SynapseParams)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    run: RunSettings = field(default_factory=RunSettings)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.run.image_width, self.run.image_height

    @property
    def patch_size(self) -> tuple[int, int]:
        return self.run.patch_width, self.run.patch_height

    @property
    def n_input(self) -> int:
        return self.run.image_width * self.run.image_height

    def to_dict(self) -> dict:
        return {section: asdict(getattr(self, attr)) for section, attr in _SECTIONS.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(_SECTIONS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config section")
        parts = {}
        for section, attr in _SECTIONS.items():
            kind = type(getattr(cls(), attr))
            values = dict(d.get(section, {}))
            names = {f.name for f in fields(kind)}
            bad = set(values) - names
            if bad:
                raise ConfigError(f"{section}.{sorted(bad)[0]}", "unknown key")
            if attr == "inh":
                parts[attr] = NeuronParams.inhibitory(**values)
            else:
                parts[attr] = kind(**values)
        return cls(**parts)

    def flat(self) -> dict[str, object]:
        return {f"{s}.{k}": v for s, sec in self.to_dict().items() for k, v in sec.items()}

    def with_overrides(self, overrides: dict[str, object]) -> "RunConfig":
        """Return a copy with dotted-name overrides applied; string values are parsed."""
        d = self.to_dict()
        for name, value in overrides.items():
            section, _, key = name.rpartition(".")
            if section not in d or key not in d[section]:
                raise ConfigError(name, "unknown parameter")
            d[section][key] = _coerce(name, d[section][key], value)
        return RunConfig.from_dict(d)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, run=replace(self.run, seed=seed),
                       encoding=replace(self.encoding, seed=seed))


def _coerce(name: str, current, value):
    if not isinstance(value, str):
        return value
    try:
        if isinstance(current, bool):
            lowered = value.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(current, int):
            return int(value)
        if isinstance(current, float):
            return float(value)
    except ValueError:
        raise ConfigError(name, f"cannot parse {value!r} as {type(current).__name__}") from None
    return value.strip()


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path) as fh:
        parser.read_file(fh)
    overrides = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            overrides[f"{section}.{key}"] = value
    return RunConfig().with_overrides(overrides)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in values.items())
        lines.append("")
    return "\n".join(lines)


def write_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))
