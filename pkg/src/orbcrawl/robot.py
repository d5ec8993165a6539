"""Robot parameter model: masses, inertias, arm mounts, thrusters and limits."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import yaml

from .kinematics import ArmChain, LinkParams, chain_frames, default_chain, yaw_rotation

DATA_DIR = Path(__file__).parent / "data"
DEFAULT_MODEL_FILE = DATA_DIR / "default_model.yaml"

# +x, -x, +y, -y, +z, -z in the body frame
THRUSTER_AXES = np.array([
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
])


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class RobotModel:
    """Multi-arm free-flyer.

    ``body_mass``/``body_inertia`` describe the central body alone; the total
    mass and the centroidal inertia used by the planner are derived from the
    body plus the arm chains in their zero configuration.
    """

    body_mass: float
    body_inertia: np.ndarray  # 3x3, about the body origin
    chain: ArmChain
    arm_names: tuple
    mount_positions: np.ndarray  # (arms, 3), body frame
    mount_yaws: np.ndarray  # (arms,)
    box_half_edges: np.ndarray  # (arms, 3) kinematic box half-edges [m]
    thruster_limits: np.ndarray  # (6,) per thruster [N], order +x,-x,+y,-y,+z,-z
    joint_lower: np.ndarray  # (n,)
    joint_upper: np.ndarray
    torque_limits: np.ndarray  # (n,)
    kp: np.ndarray = field(default_factory=lambda: np.full(6, 100.0))
    kd: np.ndarray = field(default_factory=lambda: np.full(6, 5.0))

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------------ checks
    def validate(self):
        if self.body_mass <= 0.0:
            raise ModelError("body mass must be positive")
        inertia = np.asarray(self.body_inertia)
        if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T):
            raise ModelError("body inertia must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(inertia).min() <= 0.0:
            raise ModelError("body inertia must be positive definite")
        if len(self.arm_names) < 1 or self.chain.n_joints < 1:
            raise ModelError("need at least one arm with at least one joint")
        if np.any(np.asarray(self.box_half_edges) <= 0.0):
            raise ModelError("kinematic box half-edges must be positive")
        if np.any(np.asarray(self.thruster_limits) < 0.0):
            raise ModelError("thruster limits must be non-negative")
        if np.any(np.asarray(self.kp) <= 0.0) or np.any(np.asarray(self.kd) < 0.0):
            raise ModelError("PD gains must be positive")
        norms = np.linalg.norm(THRUSTER_AXES, axis=1)
        assert np.allclose(norms, 1.0)
        boxes = self.kinematic_boxes()
        for i in range(self.n_arms):
            for j in range(i + 1, self.n_arms):
                lo = np.maximum(boxes[i][0], boxes[j][0])
                hi = np.minimum(boxes[i][1], boxes[j][1])
                if np.all(lo < hi):
                    raise ModelError(
                        f"kinematic boxes of arms {self.arm_names[i]} and {self.arm_names[j]} overlap"
                    )

    # -------------------------------------------------------------- properties
    @property
    def n_arms(self):
        return len(self.arm_names)

    @property
    def n_joints(self):
        return self.chain.n_joints

    @property
    def mass(self):
        return self.body_mass + self.n_arms * self.chain.mass

    def mount_rotation(self, arm):
        return yaw_rotation(self.mount_yaws[arm])

    @cached_property
    def nominal_offsets(self):
        """End-effector positions at zero joint angles, body frame, shape (arms, 3)."""
        return np.array([
            chain_frames(self.chain, np.zeros(self.n_joints), self.mount_positions[a], self.mount_rotation(a))[2]
            for a in range(self.n_arms)
        ])

    def kinematic_boxes(self):
        offsets = self.nominal_offsets
        half = np.asarray(self.box_half_edges)
        return [(offsets[a] - half[a], offsets[a] + half[a]) for a in range(self.n_arms)]

    @cached_property
    def centroidal_inertia(self):
        """Whole-robot inertia about the body origin in the zero configuration."""
        inertia = np.array(self.body_inertia, dtype=float)
        q0 = np.zeros(self.n_joints)
        for a in range(self.n_arms):
            mrot = self.mount_rotation(a)
            mount = self.chain.mount
            com = self.mount_positions[a] + mrot @ mount.com
            inertia += _point_inertia(mount, mrot, com)
            rots, origins, _ = chain_frames(self.chain, q0, self.mount_positions[a], mrot)
            for k, link in enumerate(self.chain.links):
                com = origins[k] + rots[k] @ link.com
                inertia += _point_inertia(link, rots[k], com)
        return inertia

    @property
    def signed_thrust_limits(self):
        """Per-axis limits of the signed thrust reduction, shape (3, 2) as (neg, pos)."""
        lim = np.asarray(self.thruster_limits, dtype=float)
        return np.array([[lim[1], lim[0]], [lim[3], lim[2]], [lim[5], lim[4]]])

    def with_mass(self, total_mass):
        """Copy with the body mass scaled so that the total mass equals ``total_mass``."""
        body = total_mass - self.n_arms * self.chain.mass
        if body <= 0.0:
            raise ModelError("requested total mass is below the arm mass")
        scale = body / self.body_mass
        return replace(self, body_mass=body, body_inertia=np.asarray(self.body_inertia) * scale)

    # --------------------------------------------------------------------- I/O
    @classmethod
    def from_dict(cls, cfg):
        chain_cfg = cfg.get("chain")
        chain = default_chain() if chain_cfg is None else _chain_from_dict(chain_cfg)
        arms = cfg["arms"]
        n = chain.n_joints
        limits = cfg.get("joint_limits", {})
        gains = cfg.get("pd_gains", {})
        return cls(
            body_mass=float(cfg["body"]["mass"]),
            body_inertia=np.diag(cfg["body"]["inertia"]) if np.ndim(cfg["body"]["inertia"]) == 1
            else np.asarray(cfg["body"]["inertia"], dtype=float),
            chain=chain,
            arm_names=tuple(a["name"] for a in arms),
            mount_positions=np.array([a["mount"] for a in arms], dtype=float),
            mount_yaws=np.radians([a["mount_yaw_deg"] for a in arms]),
            box_half_edges=np.array([a.get("box_half_edges", cfg.get("box_half_edges")) for a in arms], dtype=float),
            thruster_limits=np.asarray(cfg["thrusters"]["limits"], dtype=float),
            joint_lower=np.broadcast_to(np.asarray(limits.get("lower", -np.pi), dtype=float), (n,)).copy(),
            joint_upper=np.broadcast_to(np.asarray(limits.get("upper", np.pi), dtype=float), (n,)).copy(),
            torque_limits=np.broadcast_to(np.asarray(limits.get("torque", 150.0), dtype=float), (n,)).copy(),
            kp=np.broadcast_to(np.asarray(gains.get("kp", 100.0), dtype=float), (n,)).copy(),
            kd=np.broadcast_to(np.asarray(gains.get("kd", 5.0), dtype=float), (n,)).copy(),
        )

    @classmethod
    def load(cls, path=None):
        path = DEFAULT_MODEL_FILE if path is None else Path(path)
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    @classmethod
    def default(cls):
        return cls.load(DEFAULT_MODEL_FILE)


def _point_inertia(link: LinkParams, rot, com):
    local = rot @ np.diag(link.inertia) @ rot.T
    return local + link.mass * (com @ com * np.eye(3) - np.outer(com, com))


def _chain_from_dict(cfg):
    def link(d):
        return LinkParams(d["name"], float(d["mass"]), tuple(d["tip"]), tuple(d["inertia"]))

    return ArmChain(
        mount=link(cfg["mount"]),
        links=tuple(link(d) for d in cfg["links"]),
        axes=tuple(tuple(j["axis"]) for j in cfg["joints"]),
        zero_offsets=tuple(float(j.get("zero_offset", 0.0)) for j in cfg["joints"]),
    )
