"""Serial-chain kinematics shared by the planner model and the simulator.

Every arm uses the same six-joint chain; only the mount transform on the
body differs. Joint ``k`` rotates link ``k`` about ``axis[k]`` (expressed in
the frame of link ``k-1``) by ``q[k] + zero_offset[k]``. Link ``k`` spans the
vector ``tip[k]`` in its own frame, and the next joint sits at that tip.
The fixed mount link (``mount_tip``) carries the first joint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def axis_rotation(axis, angle):
    """Rodrigues rotation about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    k = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def yaw_rotation(yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class LinkParams:
    name: str
    mass: float
    tip: tuple  # vector to the next joint, link frame [m]
    inertia: tuple  # principal moments (Ixx, Iyy, Izz) about the CoM [kg m^2]

    @property
    def length(self):
        return float(np.linalg.norm(self.tip))

    @property
    def com(self):
        return 0.5 * np.asarray(self.tip, dtype=float)


@dataclass(frozen=True)
class ArmChain:
    """Geometry and inertia of one arm (identical for all arms)."""

    mount: LinkParams
    links: tuple  # six LinkParams
    axes: tuple  # six unit joint axes, parent-link frame
    zero_offsets: tuple  # joint angle offsets [rad]

    @property
    def n_joints(self):
        return len(self.links)

    @property
    def moving_mass(self):
        return float(sum(l.mass for l in self.links))

    @property
    def mass(self):
        return self.moving_mass + self.mount.mass


def chain_frames(chain: ArmChain, q, mount_pos, mount_rot):
    """Joint frames of one arm in the base frame.

    Returns ``(rots, origins, ee)`` where ``rots[k]``/``origins[k]`` give the
    orientation and joint position of link ``k`` and ``ee`` is the end-effector
    position (tip of the last link), all in the body frame.
    """
    q = np.asarray(q, dtype=float)
    rot = np.asarray(mount_rot, dtype=float)
    pos = np.asarray(mount_pos, dtype=float) + rot @ np.asarray(chain.mount.tip)
    rots, origins = [], []
    for k, link in enumerate(chain.links):
        rot = rot @ axis_rotation(chain.axes[k], q[k] + chain.zero_offsets[k])
        rots.append(rot)
        origins.append(pos)
        pos = pos + rot @ np.asarray(link.tip)
    return np.array(rots), np.array(origins), pos


def end_effector_position(chain, q, mount_pos, mount_rot):
    return chain_frames(chain, q, mount_pos, mount_rot)[2]


def position_jacobian(chain, q, mount_pos, mount_rot):
    """3 x n Jacobian of the end-effector position w.r.t. the arm joints (body frame)."""
    rots, origins, ee = chain_frames(chain, q, mount_pos, mount_rot)
    jac = np.empty((3, chain.n_joints))
    for k in range(chain.n_joints):
        # joint k rotates about the parent-frame axis, i.e. rots[k] @ axis (rotation leaves its axis fixed)
        axis = rots[k] @ np.asarray(chain.axes[k])
        jac[:, k] = np.cross(axis, ee - origins[k])
    return jac


def default_chain():
    """Six-joint arm with the link masses, lengths and inertias of the bundled robot."""
    mount = LinkParams("base", 4.0, (0.0, 0.0, -0.090), (0.0044, 0.0044, 0.0072))
    links = (
        LinkParams("shoulder", 3.7, (0.0, 0.0, -0.162), (0.0103, 0.0103, 0.0067)),
        LinkParams("upper_arm", 8.393, (0.425, 0.0, 0.0), (0.2269, 0.2269, 0.0151)),
        LinkParams("forearm", 2.275, (0.392, 0.0, 0.0), (0.0494, 0.0494, 0.0041)),
        LinkParams("wrist_1", 1.219, (0.133, 0.0, 0.0), (0.1112, 0.1112, 0.2194)),
        LinkParams("wrist_2", 1.219, (0.133, 0.0, 0.0), (0.1112, 0.1112, 0.2194)),
        LinkParams("wrist_3", 0.188, (0.046, 0.0, 0.0), (0.0171, 0.0171, 0.0338)),
    )
    axes = (
        (0.0, 0.0, 1.0),
        (0.0, 1.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 1.0, 0.0),
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
    )
    zero_offsets = (0.0, 0.3, 0.9, np.pi / 2 - 1.2, 0.0, 0.0)
    return ArmChain(mount, links, axes, zero_offsets)
