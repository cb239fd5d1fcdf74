"""Run configuration: YAML file -> validated model -> library objects."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .design import GridSpec
from .geometry import Scenario, SpoofShift
from .signal_model import SystemConfig, default_gains


class ConfigError(ValueError):
    """Config could not be parsed or validated; ``path`` names the field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)

    def record(self) -> dict:
        return {"error": "config", "path": self.path, "message": self.message}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Point = tuple[float, float]


class ScenarioModel(_Strict):
    alice: Point
    eve: Point
    scatterers: list[Point] = Field(default_factory=list)
    # [re, im] per path; omitted -> free-space magnitudes with seeded phases
    gains: Optional[list[tuple[float, float]]] = None


class SystemModel(_Strict):
    n_subcarriers: int = Field(16, ge=2)
    n_symbols: int = Field(16, ge=2)
    n_tx: int = Field(16, ge=2)
    bandwidth: float = Field(30.0, gt=0)
    carrier_freq: float = Field(60.0, gt=0)
    light_speed: float = Field(300.0, gt=0)
    antenna_spacing: Optional[float] = Field(None, gt=0)
    snr_db: float = 20.0
    seed: int = Field(0, ge=0, lt=2**64)


class ShiftModel(_Strict):
    delta_tau: float = 0.0
    delta_theta: float = 0.0


class GridModel(_Strict):
    n_tau: int = Field(64, ge=1)
    n_theta: int = Field(64, ge=1)
    tau_range: Optional[tuple[float, float]] = None
    theta_range: Optional[tuple[float, float]] = None
    tau_values: Optional[list[float]] = None
    theta_values: Optional[list[float]] = None

    @field_validator("tau_range", "theta_range")
    @classmethod
    def _ordered(cls, value):
        if value is not None and not value[0] < value[1]:
            raise ValueError("range must satisfy lo < hi")
        return value


class RunConfig(_Strict):
    scenario: ScenarioModel
    system: SystemModel = SystemModel()
    shift: ShiftModel = ShiftModel()
    grid: GridModel = GridModel()
    psi_slack: float = Field(0.0, ge=0)

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        return self.model_copy(update={"system": self.system.model_copy(update={"seed": seed})})

    def digest(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def system_config(self) -> SystemConfig:
        return SystemConfig(**self.system.model_dump())

    def build_scenario(self, cfg: SystemConfig | None = None) -> Scenario:
        cfg = cfg or self.system_config()
        sc = self.scenario
        if sc.gains is None:
            gains = default_gains(sc.alice, sc.eve, sc.scatterers, cfg)
        else:
            gains = np.array([complex(re, im) for re, im in sc.gains])
        return Scenario(sc.alice, sc.eve, tuple(sc.scatterers), gains)

    def spoof_shift(self) -> SpoofShift:
        return SpoofShift(self.shift.delta_tau, self.shift.delta_theta)

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(
            n_tau=g.n_tau,
            n_theta=g.n_theta,
            tau_range=g.tau_range,
            theta_range=g.theta_range,
            tau_values=tuple(g.tau_values) if g.tau_values is not None else None,
            theta_values=tuple(g.theta_values) if g.theta_values is not None else None,
        )


def default_config_text() -> str:
    return resources.files("daiscope").joinpath("data/default.yaml").read_text()


def parse_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise ConfigError(first["msg"], path) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config(default_config_text())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)
