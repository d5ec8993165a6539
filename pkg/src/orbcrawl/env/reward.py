"""Reward terms of the tracking task."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass

import numpy as np

from ..rotations import orientation_error
from .config import RewardWeights


@dataclass(frozen=True)
class RewardInputs:
    base_position: np.ndarray
    base_quaternion: np.ndarray
    target_base_position: np.ndarray
    target_base_quaternion: np.ndarray
    ee_position: np.ndarray  # (arms, 3)
    ee_quaternion: np.ndarray  # (arms, 4)
    target_ee_position: np.ndarray
    target_ee_quaternion: np.ndarray
    joint_velocity: np.ndarray  # (arms * joints,)
    joint_torque: np.ndarray
    joint_acceleration: np.ndarray
    base_linear_acceleration: np.ndarray
    base_angular_acceleration: np.ndarray
    joint_targets: np.ndarray
    prev_joint_targets: np.ndarray
    thrust: np.ndarray  # signed (3,)
    n_collisions: int = 0
    body_collision: int = 0


@dataclass(frozen=True)
class RewardBreakdown:
    body: float
    ee: float
    power: float
    joint_acc: float
    body_acc: float
    action_rate: float
    thrust: float
    collision: float
    body_collision: float
    total: float

    @property
    def parts(self):
        return astuple(self)[:-1]

    @property
    def task(self):
        return self.body + self.ee

    @property
    def normalization(self):
        return self.power + self.joint_acc + self.body_acc + self.action_rate + self.thrust

    @property
    def penalty(self):
        return self.collision + self.body_collision

    def as_dict(self):
        return dict(zip(("body", "ee", "power", "joint_acc", "body_acc", "action_rate", "thrust",
                         "collision", "body_collision", "total"), astuple(self)))

    @classmethod
    def from_parts(cls, *parts):
        return cls(*(float(p) for p in parts), total=math.fsum(parts))


def log_tracking(pos_err, rot_err, eps):
    """``-ln(|e_p| + eps) - ln(|e_r| + eps)``."""
    return -math.log(pos_err + eps) - math.log(rot_err + eps)


def compute_reward(x: RewardInputs, w: RewardWeights | None = None) -> RewardBreakdown:
    w = w or RewardWeights()
    body = w.body * log_tracking(np.linalg.norm(x.target_base_position - x.base_position),
                                 np.linalg.norm(orientation_error(x.target_base_quaternion, x.base_quaternion)), w.eps)
    ee = 0.0
    for a in range(len(x.ee_position)):
        ee += log_tracking(np.linalg.norm(x.target_ee_position[a] - x.ee_position[a]),
                           np.linalg.norm(orientation_error(x.target_ee_quaternion[a], x.ee_quaternion[a])), w.eps)
    ee *= w.ee
    n_arms = len(x.ee_position)
    per_arm = (np.asarray(x.joint_velocity) * np.asarray(x.joint_torque)).reshape(n_arms, -1).sum(axis=1)
    power = w.power * float(np.sum(per_arm**2))
    joint_acc = w.joint_acc * float(np.sum(np.square(x.joint_acceleration)))
    body_acc = w.body_acc * float(np.linalg.norm(x.base_linear_acceleration) + np.linalg.norm(x.base_angular_acceleration))
    action_rate = w.action_rate * float(np.sum(np.square(np.asarray(x.joint_targets) - x.prev_joint_targets)))
    thrust = w.thrust * float(np.linalg.norm(x.thrust))
    return RewardBreakdown.from_parts(body, ee, power, joint_acc, body_acc, action_rate, thrust,
                                      w.collision * x.n_collisions, w.body_collision * x.body_collision)
