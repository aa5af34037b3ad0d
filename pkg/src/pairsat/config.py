"""Mission configuration document: one JSON file carrying every model block.

Defaults reproduce the reference mission.  Loading is strict: unknown keys
or sections are rejected so typos fail loudly, and the CRC-32 of the
canonical serialization is stamped into every onboard file header.
"""
from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

from .environment import GroundStation, OrbitModel, ThermalModel
from .optics import DetectorModel, SourceModel
from .payload import PayloadParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    bit_rate_bps: float = 1200.0
    bit_error_rate: float = 1.0e-5
    frame_version: int = 1


@dataclass(frozen=True)
class AnalysisConfig:
    dark_excess_threshold_cps: float = 10_000.0
    # 0 disables the parametric bootstrap; propagation sigmas are used
    bootstrap_sigma_samples: int = 0


@dataclass(frozen=True)
class RuntimeConfig:
    battery_budget_wh: float = 2.0
    cadence_days: float = 15.0


@dataclass(frozen=True)
class MissionConfig:
    seed: int = 7
    source: SourceModel = field(default_factory=SourceModel)
    detectors: DetectorModel = field(default_factory=DetectorModel)
    orbit: OrbitModel = field(default_factory=OrbitModel)
    thermal: ThermalModel = field(default_factory=ThermalModel)
    station: GroundStation = field(default_factory=GroundStation)
    payload: PayloadParams = field(default_factory=PayloadParams)
    link: LinkConfig = field(default_factory=LinkConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    def to_dict(self) -> dict:
        out: dict = {"seed": self.seed}
        for name in _SECTIONS:
            out[name] = dataclasses.asdict(getattr(self, name))
        return out

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> int:
        return zlib.crc32(self.canonical_json().encode())


_SECTIONS: dict[str, type] = {
    "source": SourceModel,
    "detectors": DetectorModel,
    "orbit": OrbitModel,
    "thermal": ThermalModel,
    "station": GroundStation,
    "payload": PayloadParams,
    "link": LinkConfig,
    "analysis": AnalysisConfig,
    "runtime": RuntimeConfig,
}


def _build_section(cls: type, data: dict, section: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        default = names[key].default
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{section}]: {exc}") from exc


def config_from_dict(data: dict) -> MissionConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kwargs: dict = {}
    if "seed" in data:
        if not isinstance(data["seed"], int):
            raise ConfigError("seed must be an integer")
        kwargs["seed"] = data["seed"]
    for name, cls in _SECTIONS.items():
        if name in data:
            if not isinstance(data[name], dict):
                raise ConfigError(f"section [{name}] must be an object")
            kwargs[name] = _build_section(cls, data[name], name)
    return MissionConfig(**kwargs)


def load_config(path: str | Path) -> MissionConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(config: MissionConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
