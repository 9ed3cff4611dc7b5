"""Experiment configuration: defaults, YAML round-trip, hashing.

A single hierarchical config drives every CLI command.  All defaults follow
the stock 72-subcarrier setup; anything can be overridden in the YAML file or
with --set on the command line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .baselines import CfParams, SlmParams
from .errors import ConfigError
from .frontend import HpaParams
from .losses import LossWeights
from .training import TrainConfig

__all__ = [
    "SystemConfig",
    "ModelConfig",
    "EvalConfig",
    "ExperimentConfig",
    "default_config",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "save_config",
    "config_hash",
    "build_id",
]

VALID_METHODS = ("none", "cf", "slm", "cae", "fc_ae")
NEURAL_METHODS = ("cae", "fc_ae")


@dataclass(frozen=True)
class SystemConfig:
    n_subcarriers: int = 72
    oversampling: int = 4
    constellation: str = "qam4"

    def __post_init__(self):
        if self.constellation != "qam4":
            raise ValueError(f"only the qam4 constellation is wired up, got {self.constellation!r}")
        if self.oversampling < 3:
            raise ValueError("oversampling must be >= 3 so the adjacent bands fit the spectrum")


@dataclass(frozen=True)
class ModelConfig:
    enc_channels: tuple[int, int] = (13, 11)
    dec_channels: tuple[int, int] = (11, 13)
    kernel: int = 3
    padding: int = 2
    activation: str = "selu"
    complex_layout: str = "interleaved"
    fc_hidden: tuple[int, int] = (2500, 3500)


@dataclass(frozen=True)
class EvalConfig:
    p_snr_db: tuple[float, ...] = (6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    ber_symbols: int = 20000
    ccdf_symbols: int = 100000
    ccdf_min_db: float = 0.0
    ccdf_max_db: float = 13.0
    ccdf_step_db: float = 0.25
    psd_symbols: int = 10000
    table_symbols: int = 20000
    obo_acpr_ibo_db: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    batch: int = 500
    linear_chain: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    hpa: HpaParams = field(default_factory=HpaParams)
    acpr_req_db: float = -45.0
    cf: CfParams = field(default_factory=CfParams)
    slm: SlmParams = field(default_factory=SlmParams)
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    methods: tuple[str, ...] = ("none", "cf", "slm", "cae")
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 1234
    output_dir: str = "runs"

    def __post_init__(self):
        for m in self.methods:
            if m not in VALID_METHODS:
                raise ValueError(f"unknown method {m!r}, expected one of {VALID_METHODS}")


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def config_to_dict(config: ExperimentConfig) -> dict:
    def clean(value):
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, tuple):
            return [clean(v) for v in value]
        return value
    return clean(asdict(config))


def _build(cls, data, path: str):
    """Construct one flat config section from a plain dict, strictly."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config field {path}.{key}")
    kwargs = {name: tuple(value) if isinstance(value, list) else value
              for name, value in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from err


_SECTIONS = {
    "system": SystemConfig,
    "model": ModelConfig,
    "hpa": HpaParams,
    "cf": CfParams,
    "slm": SlmParams,
    "train": TrainConfig,
    "loss": LossWeights,
    "eval": EvalConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config field {key}")
    kwargs = {}
    for name, value in data.items():
        if name in _SECTIONS:
            kwargs[name] = _build(_SECTIONS[name], value, name)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return config_from_dict(data)


def save_config(config: ExperimentConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)


def config_hash(config: ExperimentConfig) -> str:
    """Stable hex digest of the experiment parameters.

    output_dir is excluded: it locates the results but does not change them,
    so runs of the same experiment hash identically wherever they land.
    """
    data = config_to_dict(config)
    data.pop("output_dir", None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def build_id() -> str:
    """Hex digest over the package sources, identifying the code that ran."""
    digest = hashlib.sha256()
    root = Path(__file__).parent
    for source in sorted(root.glob("*.py")):
        digest.update(source.name.encode("utf-8"))
        digest.update(source.read_bytes())
    return digest.hexdigest()[:12]
