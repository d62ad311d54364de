"""Pipeline configuration: one JSON document with a section per module."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .adaptation import ZoneThresholds
from .errors import ConfigError
from .flowrecon import WakeConfig
from .forecast import TrainConfig
from .indicators import IndexConfig


@dataclass(frozen=True)
class ForecastSection:
    indicator: str = "green"
    degree: int = 2
    horizon: int = 3
    lstm: TrainConfig = field(default_factory=TrainConfig)


@dataclass(frozen=True)
class FlowSection:
    wake: WakeConfig = field(default_factory=WakeConfig)
    n_u: int = 4
    n_p: int = 4
    ridge: float = 1e-8
    holdout: str = "interleaved"  # or "none"
    plane: tuple = ("vertical", 32)


@dataclass(frozen=True)
class FusionSection:
    layers: tuple = (4, 2)
    epochs: int = 500
    learning_rate: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    index: IndexConfig = field(default_factory=IndexConfig)
    calibration: ZoneThresholds = field(default_factory=ZoneThresholds)
    forecast: ForecastSection = field(default_factory=ForecastSection)
    flow: FlowSection = field(default_factory=FlowSection)
    fusion: FusionSection = field(default_factory=FusionSection)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with ``seed`` applied to every seeded stage."""
        fc = dataclasses.replace(self.forecast, lstm=dataclasses.replace(self.forecast.lstm, seed=seed))
        fl = dataclasses.replace(self.flow, wake=dataclasses.replace(self.flow.wake, seed=seed))
        fu = dataclasses.replace(self.fusion, seed=seed)
        return dataclasses.replace(self, forecast=fc, flow=fl, fusion=fu)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key {where}.{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        known_field = known[name]
        if known_field.default_factory is not dataclasses.MISSING:
            default = known_field.default_factory()
        else:
            default = known_field.default
        path = f"{where}.{name}"
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, path)
        elif isinstance(default, tuple):
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "config")
    if cfg.flow.holdout not in ("interleaved", "none"):
        raise ConfigError(f"config.flow.holdout must be 'interleaved' or 'none', got {cfg.flow.holdout!r}")
    if cfg.forecast.indicator == "" or cfg.forecast.degree < 0 or cfg.forecast.horizon < 1:
        raise ConfigError("config.forecast: need a named indicator, degree >= 0, horizon >= 1")
    if not cfg.fusion.layers or min(cfg.fusion.layers) < 1:
        raise ConfigError("config.fusion.layers must be a non-empty list of sizes >= 1")
    return cfg


def load_config(path) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
