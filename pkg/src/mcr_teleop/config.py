"""Configuration loading: packaged defaults, deep-merged user overrides,
and assembly of the typed parameter objects the stack consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import yaml

from .control import ControlParams, DynamicsModel, ImpedanceParams, PriorityWeights
from .errors import InvalidSpec
from .kinematics import ArmModel
from .service import SessionConfig
from .teleop import MapperParams


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Packaged defaults, optionally merged with a user YAML file and an
    in-memory override dict (applied in that order)."""
    text = resources.files("mcr_teleop.data").joinpath("default.yaml").read_text()
    merged = yaml.safe_load(text)
    if path is not None:
        with open(path) as f:
            user = yaml.safe_load(f) or {}
        if not isinstance(user, dict):
            raise InvalidSpec(f"config file {path} must contain a mapping")
        merged = _deep_merge(merged, user)
    if overrides:
        merged = _deep_merge(merged, overrides)
    return merged


@dataclass
class RateConfig:
    plant_rate: float = 500.0
    control_rate: float = 100.0
    telemetry_divisor: int = 2
    arm_lag: float = 0.05

    def __post_init__(self):
        if self.plant_rate <= 0 or self.control_rate <= 0:
            raise InvalidSpec("rates must be positive")
        divisor = self.plant_rate / self.control_rate
        if abs(divisor - round(divisor)) > 1e-9 or round(divisor) < 1:
            raise InvalidSpec(
                f"plant rate {self.plant_rate} must be an integer multiple "
                f"of control rate {self.control_rate}")
        if self.telemetry_divisor < 1:
            raise InvalidSpec("telemetry divisor must be >= 1")

    @property
    def plant_dt(self) -> float:
        return 1.0 / self.plant_rate

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate

    @property
    def control_divisor(self) -> int:
        return round(self.plant_rate / self.control_rate)

    @classmethod
    def from_dict(cls, d: dict) -> "RateConfig":
        return cls(plant_rate=float(d.get("plant_rate", 500.0)),
                   control_rate=float(d.get("control_rate", 100.0)),
                   telemetry_divisor=int(d.get("telemetry_divisor", 2)),
                   arm_lag=float(d.get("arm_lag", 0.05)))


@dataclass
class NetworkConfig:
    bind: str = "127.0.0.1"
    command_port: int = 47761
    telemetry_port: int = 47762
    web_port: int = 47763

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(bind=str(d.get("bind", "127.0.0.1")),
                   command_port=int(d.get("command_port", 47761)),
                   telemetry_port=int(d.get("telemetry_port", 47762)),
                   web_port=int(d.get("web_port", 47763)))


@dataclass
class StackConfig:
    """Everything one control stack needs, assembled from the config tree."""

    arm: ArmModel
    dynamics: DynamicsModel
    control: ControlParams
    impedance: ImpedanceParams
    manipulation_weights: PriorityWeights
    locomotion_weights: PriorityWeights
    mapper: MapperParams
    session: SessionConfig
    rates: RateConfig
    network: NetworkConfig
    source_rate: float = 30.0

    @classmethod
    def from_dict(cls, d: dict) -> "StackConfig":
        controller = d["controller"]
        return cls(
            arm=ArmModel.default(),
            dynamics=DynamicsModel.from_dict(d["dynamics"]),
            control=ControlParams.from_dict(controller),
            impedance=ImpedanceParams.from_dict(controller["impedance"]),
            manipulation_weights=PriorityWeights.from_dict(
                controller["priorities"]["manipulation"]),
            locomotion_weights=PriorityWeights.from_dict(
                controller["priorities"]["locomotion"]),
            mapper=MapperParams.from_dict(d["mapper"]),
            session=SessionConfig.from_dict(d["service"]),
            rates=RateConfig.from_dict(d["sim"]),
            network=NetworkConfig.from_dict(d["service"]),
            source_rate=float(d.get("source", {}).get("rate", 30.0)),
        )

    @classmethod
    def default(cls) -> "StackConfig":
        return cls.from_dict(load_config())
