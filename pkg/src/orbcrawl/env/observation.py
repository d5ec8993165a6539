"""Observation vector layout and construction.

Layout (``z`` arms, ``n`` joints per arm)::

    base position 3 | base quaternion 4 | base linear velocity 3 | base angular velocity 3
    desired base position 3 | desired base quaternion 4
    joint positions z*n | joint velocities z*n
    previous action z*n + 3
    end-effector poses 7z (position 3, quaternion 4 per arm)
    desired end-effector poses 7z

Quaternions are scalar-first.  Noise only touches the measured base pose,
base velocities and joint states.
"""

from __future__ import annotations

import numpy as np

from ..rotations import quat_from_rotvec, quat_multiply

# channels that carry sensor noise, keyed to ObservationNoise fields
NOISY = {
    "base_position": "base_position",
    "base_linear_velocity": "linear_velocity",
    "base_angular_velocity": "angular_velocity",
    "joint_position": "joint_position",
    "joint_velocity": "joint_velocity",
}


def observation_size(n_arms, n_joints):
    return 13 + 7 + 2 * n_arms * n_joints + (n_arms * n_joints + 3) + 14 * n_arms


def observation_layout(n_arms, n_joints) -> dict:
    """Name -> slice of every observation block."""
    nj = n_arms * n_joints
    sizes = [
        ("base_position", 3), ("base_quaternion", 4), ("base_linear_velocity", 3), ("base_angular_velocity", 3),
        ("target_base_position", 3), ("target_base_quaternion", 4),
        ("joint_position", nj), ("joint_velocity", nj), ("previous_action", nj + 3),
        ("ee_pose", 7 * n_arms), ("target_ee_pose", 7 * n_arms),
    ]
    out, i = {}, 0
    for name, size in sizes:
        out[name] = slice(i, i + size)
        i += size
    return out


def _uniform(rng, bounds, size):
    return rng.uniform(bounds[0], bounds[1], size=size)


def build_observation(state, ee_pose, targets, prev_action, noise=None, rng=None):
    """Flat observation of ``state``.

    ``ee_pose`` is ``(arms, 7)`` measured end-effector poses and ``targets`` a
    ``Targets``.  With ``noise`` (an ``ObservationNoise``) and ``rng`` given,
    uniform noise is added to the sensor channels; the base quaternion is
    perturbed by a rotation vector drawn per axis.
    """
    body = state.body
    pos, quat = body.position.copy(), body.quaternion.copy()
    vel, omega = body.velocity.copy(), body.omega.copy()
    q, qd = state.q.copy(), state.qd.copy()
    if noise is not None and noise.enabled and rng is not None:
        pos += _uniform(rng, noise.base_position, 3)
        quat = quat_multiply(quat, quat_from_rotvec(_uniform(rng, noise.base_orientation, 3)))
        vel += _uniform(rng, noise.linear_velocity, 3)
        omega += _uniform(rng, noise.angular_velocity, 3)
        q += _uniform(rng, noise.joint_position, q.size)
        qd += _uniform(rng, noise.joint_velocity, qd.size)
    target_ee = np.concatenate([targets.ee_position, targets.ee_quaternion], axis=1)
    return np.concatenate([
        pos, quat, vel, omega,
        targets.base_position, targets.base_quaternion,
        q, qd, np.asarray(prev_action, float),
        np.asarray(ee_pose, float).reshape(-1), target_ee.reshape(-1),
    ])
