"""Planning problem definition and scenario-to-problem construction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..heightmap import DEFAULT_CLEARANCE, HeightMap
from ..robot import RobotModel
from ..rotations import euler_to_rotation
from ..schedule import DEFAULT_SWING_ORDER


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class CostWeights:
    force: tuple = (1.0, 1.0, 1.0)  # per-axis contact-force weights, shared by all arms
    velocity: tuple = (10.0, 10.0, 10.0)  # base linear velocity
    angular_rate: float = 0.0
    thrust: float = 1e-3  # regularisation of the thruster profile
    swing_velocity: float = 1e-2  # regularisation of free end-effector motion

    def __post_init__(self):
        vals = np.concatenate([self.force, self.velocity, [self.angular_rate, self.thrust, self.swing_velocity]])
        if np.any(vals < 0.0):
            raise ProblemError("cost weights must be non-negative")


@dataclass(frozen=True)
class OcpProblem:
    model: RobotModel
    hmap: HeightMap
    start_position: np.ndarray
    start_rpy: np.ndarray
    goal_position: np.ndarray
    goal_rpy: np.ndarray
    duration: float
    n_contacts: tuple  # contact phases per arm
    starts_in_contact: bool = True
    n_thrust_segments: int = 4
    polys_per_segment: int = 3
    base_segment_duration: float = 0.5
    nodes_per_phase: int = 4
    weights: CostWeights = field(default_factory=CostWeights)
    clearance: float = DEFAULT_CLEARANCE
    thrusters: bool = True
    swing_order: tuple = DEFAULT_SWING_ORDER
    sequential_swings: bool = True
    min_phase_duration: float = 0.1
    min_swing_duration: float = 0.1
    min_thrust_segment: float = 0.05
    approach_time: float | None = None
    name: str = "problem"

    def __post_init__(self):
        for key in ("start_position", "start_rpy", "goal_position", "goal_rpy"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float))
        if isinstance(self.n_contacts, int):
            object.__setattr__(self, "n_contacts", (self.n_contacts,) * self.model.n_arms)
        self.validate()

    def validate(self):
        if not self.duration > 0.0:
            raise ProblemError("maneuver duration must be positive")
        if len(self.n_contacts) != self.model.n_arms or min(self.n_contacts) < 1:
            raise ProblemError("every arm needs at least one contact phase")
        if self.n_thrust_segments < 1 or self.polys_per_segment < 1:
            raise ProblemError("segment counts must be >= 1")
        n_base = self.duration / self.base_segment_duration
        if abs(n_base - round(n_base)) > 1e-9 or n_base < 2:
            raise ProblemError("base segment duration must divide the maneuver duration")
        for rpy in (self.start_rpy, self.goal_rpy):
            if abs(abs(rpy[1]) - np.pi / 2) < 0.2:
                raise ProblemError("pitch too close to +-90 deg for the Euler parametrisation")
        for p in (self.start_position, self.goal_position):
            feet = p + (euler_to_rotation(self.start_rpy) @ self.model.nominal_offsets.T).T
            if not self.hmap.contains(feet[:, 0], feet[:, 1]):
                raise ProblemError("start or goal footprint lies outside the map")
        if sorted(self.swing_order) != list(range(self.model.n_arms)):
            raise ProblemError("swing order must be a permutation of the arms")
        if self.starts_in_contact:
            feet = self.start_feet
            gap = feet[:, 2] - self.hmap.height_at(feet[:, 0], feet[:, 1])
            if np.abs(gap).max() > 1e-6:
                raise ProblemError("robot starts in contact but its feet are not on the surface")

    @property
    def n_base_segments(self):
        return int(round(self.duration / self.base_segment_duration))

    @property
    def start_feet(self):
        rot = euler_to_rotation(self.start_rpy)
        return self.start_position + (rot @ self.model.nominal_offsets.T).T

    def with_(self, **kw):
        return replace(self, **kw)


def docked_height(model: RobotModel, hmap: HeightMap, xy, rpy=(0.0, 0.0, 0.0)):
    """Body height that puts every nominal foot on the surface (exact for level maps)."""
    rot = euler_to_rotation(rpy)
    feet = (rot @ model.nominal_offsets.T).T
    z_map = hmap.height_at(xy[0] + feet[:, 0], xy[1] + feet[:, 1])
    return float(np.mean(z_map - feet[:, 2]))
