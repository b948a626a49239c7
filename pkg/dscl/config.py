"""Experiment configuration: one JSON document loaded into frozen dataclasses."""

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Tuple

from .data_synth import SyntheticDatasetSpec
from .encoder import EncoderSpec
from .errors import ConfigError, IoError
from .experiments import DEFAULT_BATCH_SIZES, DEFAULT_TAU_PLUS_VALUES
from .losses import LossConfig
from .similarity import DEFAULT_BINS, OverlapMode
from .trainer import TrainConfig


@dataclass(frozen=True)
class AnalysisConfig:
    bins: int = DEFAULT_BINS
    simulate_pairs: int = 0
    overlap_mode: OverlapMode = OverlapMode.POOLED

    def __post_init__(self):
        object.__setattr__(self, "overlap_mode", OverlapMode(self.overlap_mode))
        if self.bins < 2:
            raise ConfigError(f"analysis.bins must be >= 2, got {self.bins}")
        if self.simulate_pairs < 0:
            raise ConfigError("analysis.simulate_pairs must be >= 0")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    formats: Tuple[str, ...] = ("json", "csv")

    def __post_init__(self):
        unknown = set(self.formats) - {"json", "csv"}
        if unknown:
            raise ConfigError(f"unknown output formats: {sorted(unknown)}")


@dataclass(frozen=True)
class SweepConfig:
    tau_plus_values: Tuple[float, ...] = DEFAULT_TAU_PLUS_VALUES
    batch_sizes: Tuple[int, ...] = DEFAULT_BATCH_SIZES


@dataclass(frozen=True)
class ExperimentConfig:
    """A full run: data, encoder, training, the losses to compare and outputs.

    ``losses`` may be empty, in which case ``train.loss`` is the only loss.
    """

    dataset: SyntheticDatasetSpec
    encoder: EncoderSpec
    train: TrainConfig
    losses: Tuple[LossConfig, ...] = ()
    n_seeds: int = 3
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.encoder.input_dim != self.dataset.dim:
            raise ConfigError(
                f"encoder.input_dim {self.encoder.input_dim} != dataset.dim {self.dataset.dim}"
            )

    @property
    def comparison_losses(self):
        return list(self.losses) or [self.train.loss]


def _is_optional(tp):
    return typing.get_origin(tp) is typing.Union and type(None) in typing.get_args(tp)


def _convert(tp, value, path):
    if _is_optional(tp):
        if value is None:
            return None
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return _convert(inner, value, path)
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, path)
    if typing.get_origin(tp) is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        inner = typing.get_args(tp)[0]
        return tuple(_convert(inner, v, f"{path}[{i}]") for i, v in enumerate(value))
    if isinstance(tp, type) and issubclass(tp, Enum):
        try:
            return tp(value)
        except ValueError:
            choices = [m.value for m in tp]
            raise ConfigError(f"{path}: {value!r} is not one of {choices}") from None
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {tp!r}")


def from_dict(cls, data, path=""):
    """Build dataclass ``cls`` from ``data``, rejecting unknown and missing keys.

    Errors name the dotted path of the offending key.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {unknown}")
    kwargs = {}
    for name, f in fields.items():
        key = f"{path}.{name}" if path else name
        if name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise ConfigError(f"{key}: required key is missing")
            continue
        kwargs[name] = _convert(hints[name], data[name], key)
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def to_dict(obj):
    """Plain JSON-ready form of a config dataclass."""
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    return obj


def load_config(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise IoError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return from_dict(ExperimentConfig, data)


def _schema_for(tp):
    if _is_optional(tp):
        inner = [a for a in typing.get_args(tp) if a is not type(None)][0]
        return {"anyOf": [_schema_for(inner), {"type": "null"}]}
    if dataclasses.is_dataclass(tp):
        return json_schema(tp)
    if typing.get_origin(tp) is tuple:
        return {"type": "array", "items": _schema_for(typing.get_args(tp)[0])}
    if isinstance(tp, type) and issubclass(tp, Enum):
        return {"enum": [m.value for m in tp]}
    return {
        bool: {"type": "boolean"},
        int: {"type": "integer"},
        float: {"type": "number"},
        str: {"type": "string"},
    }[tp]


def json_schema(cls=ExperimentConfig):
    """JSON Schema of a config dataclass, derived from its fields."""
    hints = typing.get_type_hints(cls)
    properties, required = {}, []
    for f in dataclasses.fields(cls):
        if not f.init:
            continue
        properties[f.name] = _schema_for(hints[f.name])
        if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            required.append(f.name)
        elif f.default is not dataclasses.MISSING:
            properties[f.name]["default"] = to_dict(f.default)
    schema = {
        "type": "object",
        "title": cls.__name__,
        "properties": properties,
        "additionalProperties": False,
    }
    if required:
        schema["required"] = required
    return schema
