"""Environment configuration: reward weights, randomisation, noise, curriculum."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..robot import DATA_DIR

PPO_CONFIG_FILE = DATA_DIR / "ppo.yaml"


@dataclass(frozen=True)
class RewardWeights:
    body: float = 20.0
    ee: float = 15.0
    eps: float = 1e-5
    power: float = -2.5e-2
    joint_acc: float = -1e-6
    body_acc: float = -1e-2
    action_rate: float = -1e-2
    thrust: float = -1e-2
    collision: float = -1.0
    body_collision: float = -200.0

    def __post_init__(self):
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


def _check_range(name, rng):
    lo, hi = rng
    if not lo <= hi:
        raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")


@dataclass(frozen=True)
class Randomization:
    """Reset randomisation; each entry is a ``(lo, hi)`` uniform range."""

    enabled: bool = True
    base_position: tuple = (-0.2, 0.2)  # per axis [m]
    joint_position: tuple = (-0.1, 0.1)  # additive [rad]
    joint_scale: tuple = (-0.25, 0.25)  # relative jitter of the default joint angles
    mass_scale: tuple = (0.9, 1.1)

    def __post_init__(self):
        for f in fields(self):
            if f.name != "enabled":
                _check_range(f.name, getattr(self, f.name))
        if self.mass_scale[0] <= 0.0:
            raise ValueError("mass scale must stay positive")


@dataclass(frozen=True)
class ObservationNoise:
    """Additive uniform noise ranges of the sensor channels."""

    enabled: bool = True
    evaluation: bool = False  # also inject noise in plan-tracking rollouts
    base_position: tuple = (-0.025, 0.025)  # [m]
    base_orientation: tuple = (-0.02, 0.02)  # per rotation-vector axis [rad]
    linear_velocity: tuple = (-0.05, 0.05)  # [m/s]
    angular_velocity: tuple = (-0.05, 0.05)  # [rad/s]
    joint_position: tuple = (-0.02, 0.02)  # [rad]
    joint_velocity: tuple = (-0.1, 0.1)  # [rad/s]

    def __post_init__(self):
        for f in fields(self):
            if f.name not in ("enabled", "evaluation"):
                _check_range(f.name, getattr(self, f.name))


@dataclass(frozen=True)
class CurriculumConfig:
    threshold: float = 0.05  # mean base error that unlocks the next stage [m]
    step: float = 0.10  # growth of the base target range [m]
    initial_range: float = 0.0
    max_range: float | None = None
    window: int = 10  # finished episodes per update
    ee_radius: float = 0.2  # end-effector target ball [m]

    def __post_init__(self):
        if self.threshold <= 0.0 or self.step < 0.0 or self.initial_range < 0.0 or self.window < 1:
            raise ValueError("curriculum threshold must be positive, step/range non-negative, window >= 1")
        if self.ee_radius < 0.0:
            raise ValueError("ee_radius must be non-negative")


@dataclass(frozen=True)
class EnvConfig:
    episode_length: float = 15.0  # [s]
    control_rate: float = 50.0  # policy [Hz]
    sim_rate: float = 200.0  # joint PD / integrator [Hz]
    rewards: RewardWeights = field(default_factory=RewardWeights)
    randomization: Randomization = field(default_factory=Randomization)
    noise: ObservationNoise = field(default_factory=ObservationNoise)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    target_changes: tuple = (5.0, 10.0)  # end-effector target resampling times [s]
    hover_height: float = 0.25  # nominal base lift above the docked height [m]
    body_half_extents: tuple = (0.4, 0.4, 0.2)  # collision box of the base [m]
    thrusters: bool = True
    model: str | None = None
    map: dict = field(default_factory=lambda: {"type": "flat", "z": 0.0})

    def __post_init__(self):
        if self.control_rate <= 0.0 or self.sim_rate <= 0.0 or self.episode_length <= 0.0:
            raise ValueError("rates and episode length must be positive")
        ratio = self.sim_rate / self.control_rate
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("sim_rate must be an integer multiple of control_rate")
        if any(h <= 0.0 for h in self.body_half_extents):
            raise ValueError("body half extents must be positive")

    @property
    def substeps(self):
        return int(round(self.sim_rate / self.control_rate))

    @property
    def max_steps(self):
        return int(round(self.episode_length * self.control_rate))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, cfg: dict):
        cfg = dict(cfg or {})
        nested = {"rewards": RewardWeights, "randomization": Randomization,
                  "noise": ObservationNoise, "curriculum": CurriculumConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown env config keys: {sorted(unknown)}")
        for key, typ in nested.items():
            if key in cfg:
                sub = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg[key].items()}
                cfg[key] = typ(**sub)
        for key in ("target_changes", "body_half_extents"):
            if key in cfg:
                cfg[key] = tuple(cfg[key])
        return cls(**cfg)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def save(self, path):
        def plain(v):
            if isinstance(v, dict):
                return {k: plain(x) for k, x in v.items()}
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            return v

        Path(path).write_text(yaml.safe_dump(plain(self.to_dict()), sort_keys=False))


def load_ppo_config(path=None) -> dict:
    """Hyperparameters for an external PPO trainer; nothing here consumes them."""
    with open(path or PPO_CONFIG_FILE) as fh:
        return yaml.safe_load(fh)
