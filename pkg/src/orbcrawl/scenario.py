"""Scenario files: one YAML document per experiment."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .heightmap import HeightMap
from .robot import RobotModel


class ConfigError(ValueError):
    pass


BUNDLED = ("case1_1", "case1_2", "case2", "ablation_5s", "hover")


@dataclass(frozen=True)
class Pose:
    xy: tuple = (0.0, 0.0)
    height: float = 0.0  # end-effector height above the surface; 0 means docked
    rpy: tuple = (0.0, 0.0, 0.0)  # [rad]


@dataclass(frozen=True)
class ControllerConfig:
    name: str = "diffik"
    rate: float = 50.0  # outer loop [Hz]
    damping: float = 0.05
    gain: float = 1.0
    stiffness: float = 1500.0  # impedance [N/m]
    damping_ratio: float = 1.0
    kp: float | None = None
    kd: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    model: str | None = None
    map: dict = field(default_factory=lambda: {"type": "flat", "z": 0.0})
    start: Pose = field(default_factory=Pose)
    goal: Pose = field(default_factory=Pose)
    duration: float = 20.0
    contacts: int = 4
    thrust_segments: int = 4
    polys_per_segment: int = 3
    base_segment: float = 0.5
    clearance: float = 0.05
    thrusters: bool = True
    weights: dict = field(default_factory=dict)
    swing_order: tuple | None = None
    sequential_swings: bool = True
    approach_time: float | None = None
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    env: str | None = None
    out: str | None = None
    seed: int = 0
    base_dir: str | None = None

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ConfigError("duration must be positive")
        if int(self.contacts) < 1:
            raise ConfigError("contacts must be >= 1")
        if int(self.thrust_segments) < 1 or int(self.polys_per_segment) < 1:
            raise ConfigError("segment counts must be >= 1")
        if self.start.height < 0.0 or self.goal.height < 0.0:
            raise ConfigError("heights above the surface must be >= 0")
        if self.goal.height != 0.0:
            raise ConfigError("the goal pose must be docked (height 0)")

    def _resolve(self, ref):
        path = Path(ref)
        if not path.is_absolute() and self.base_dir is not None:
            path = Path(self.base_dir) / path
        if not path.exists():
            raise ConfigError(f"referenced file {ref!r} does not exist")
        return path

    def load_model(self) -> RobotModel:
        return RobotModel.default() if self.model in (None, "default") else RobotModel.load(self._resolve(self.model))

    def load_map(self) -> HeightMap:
        try:
            return HeightMap.from_config(self.map, base_dir=self.base_dir)
        except (KeyError, ValueError, OSError) as exc:
            raise ConfigError(f"bad map spec: {exc}") from exc

    def with_(self, **kw):
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kw)
        return ScenarioConfig(**data)


def _pose(d, key):
    if d is None:
        return Pose()
    unknown = set(d) - {"xy", "height", "rpy"}
    if unknown:
        raise ConfigError(f"unknown keys in {key}: {sorted(unknown)}")
    xy = tuple(float(v) for v in d.get("xy", (0.0, 0.0)))
    rpy = tuple(float(v) for v in d.get("rpy", (0.0, 0.0, 0.0)))
    if len(xy) != 2 or len(rpy) != 3:
        raise ConfigError(f"{key}: xy needs 2 values and rpy 3")
    return Pose(xy, float(d.get("height", 0.0)), rpy)


def scenario_from_dict(cfg: dict, base_dir=None) -> ScenarioConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("scenario must be a mapping")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    data = dict(cfg)
    data["start"] = _pose(cfg.get("start"), "start")
    data["goal"] = _pose(cfg.get("goal"), "goal")
    ctrl = cfg.get("controller") or {}
    try:
        data["controller"] = ControllerConfig(**ctrl)
    except TypeError as exc:
        raise ConfigError(f"bad controller section: {exc}") from exc
    if "swing_order" in cfg and cfg["swing_order"] is not None:
        data["swing_order"] = tuple(int(v) for v in cfg["swing_order"])
    for key in ("duration", "base_segment", "clearance"):
        if key in data:
            data[key] = float(data[key])
    for key in ("contacts", "thrust_segments", "polys_per_segment", "seed"):
        if key in data:
            data[key] = int(data[key])
    data["base_dir"] = None if base_dir is None else str(base_dir)
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file, or a bundled scenario by name."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = Path(str(resources.files("orbcrawl") / "data" / "scenarios" / f"{path}.yaml"))
    if not p.exists():
        raise ConfigError(f"scenario file {path} not found")
    try:
        with open(p) as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    cfg = cfg or {}
    cfg.setdefault("name", p.stem)
    return scenario_from_dict(cfg, base_dir=p.parent)


def pose_position(model, hmap, pose: Pose):
    """Base position for a pose: docked height plus the requested lift."""
    from .ocp.problem import docked_height

    z = docked_height(model, hmap, pose.xy, pose.rpy) + pose.height
    return np.array([pose.xy[0], pose.xy[1], z])
