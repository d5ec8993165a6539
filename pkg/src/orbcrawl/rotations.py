"""Quaternion and rotation helpers.

Conventions used everywhere in the package:

* quaternions are stored scalar-first ``[w, x, y, z]`` and canonicalised to
  ``w >= 0`` after normalisation;
* ``quat_to_rotation(q)`` returns the body-to-inertial matrix ``R`` so that
  ``v_I = R @ v_B``. Its transpose is the inertial-to-body matrix;
* angular velocities handed to :func:`quat_derivative` are body-frame rates;
* Euler angles use the ZYX (yaw-pitch-roll) sequence and are ordered
  ``(roll, pitch, yaw)``. They only appear at I/O boundaries and in the
  planner's orientation channel.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-6


def skew(v):
    v = np.asarray(v, dtype=float)
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError("cannot normalise a zero or non-finite quaternion")
    q = q / n
    return -q if q[0] < 0.0 else q


def quat_multiply(a, b):
    """Hamilton product ``a ⊗ b``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q):
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _check_unit(q, tol=UNIT_TOL):
    q = np.asarray(q, dtype=float)
    if q.shape != (4,):
        raise ValueError(f"quaternion must have shape (4,), got {q.shape}")
    if abs(np.linalg.norm(q) - 1.0) > tol:
        raise ValueError(f"quaternion is not unit-norm (|q| = {np.linalg.norm(q):.3e})")
    return q


def quat_to_rotation(q):
    """Body-to-inertial rotation matrix of a unit quaternion.

    Raises ``ValueError`` when ``|q|`` deviates from one by more than 1e-6,
    which almost always means an integrator forgot to renormalise.
    """
    q = _check_unit(q)
    w, v = q[0], q[1:]
    return (w * w - v @ v) * np.eye(3) + 2.0 * np.outer(v, v) + 2.0 * w * skew(v)


def inertial_to_body(q):
    """``(w² - vᵀv) E + 2 v vᵀ - 2 w [v]×``, the transpose of :func:`quat_to_rotation`."""
    q = _check_unit(q)
    w, v = q[0], q[1:]
    return (w * w - v @ v) * np.eye(3) + 2.0 * np.outer(v, v) - 2.0 * w * skew(v)


def quat_derivative(q, omega):
    """Time derivative of ``q`` under body angular velocity ``omega``.

    Equivalent to ``0.5 * Omega(omega) @ q``; the result is orthogonal to
    ``q`` because ``Omega`` is skew-symmetric.
    """
    q = _check_unit(q)
    wx, wy, wz = np.asarray(omega, dtype=float)
    omega_mat = np.array([
        [0.0, -wx, -wy, -wz],
        [wx, 0.0, wz, -wy],
        [wy, -wz, 0.0, wx],
        [wz, wy, -wx, 0.0],
    ])
    return 0.5 * omega_mat @ q


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-15:
        return np.array([1.0, 0.0, 0.0, 0.0])
    half = 0.5 * angle
    return quat_normalize(np.concatenate([[np.cos(half)], np.sin(half) * axis / n]))


def quat_from_rotvec(rv):
    rv = np.asarray(rv, dtype=float)
    return quat_from_axis_angle(rv, np.linalg.norm(rv))


def quat_to_rotvec(q):
    """Axis-angle vector of ``q`` with angle in ``[0, pi]``."""
    q = quat_normalize(q)
    s = np.linalg.norm(q[1:])
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return angle * q[1:] / s


def orientation_error(q_desired, q_current):
    """Axis-angle of ``q_desired ⊗ conj(q_current)``."""
    return quat_to_rotvec(quat_multiply(q_desired, quat_conjugate(q_current)))


def euler_to_quat(rpy):
    roll, pitch, yaw = rpy
    cr, sr = np.cos(0.5 * roll), np.sin(0.5 * roll)
    cp, sp = np.cos(0.5 * pitch), np.sin(0.5 * pitch)
    cy, sy = np.cos(0.5 * yaw), np.sin(0.5 * yaw)
    return quat_normalize(np.array([
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    ]))


def quat_to_euler(q):
    w, x, y, z = quat_normalize(q)
    roll = np.arctan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    pitch = np.arcsin(np.clip(2.0 * (w * y - z * x), -1.0, 1.0))
    yaw = np.arctan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return np.array([roll, pitch, yaw])


def euler_to_rotation(rpy):
    roll, pitch, yaw = rpy
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def random_quaternion(rng):
    return quat_normalize(rng.normal(size=4))


def rotation_to_quat(rot):
    """Unit quaternion (scalar-first, ``w >= 0``) of a rotation matrix."""
    r = np.asarray(rot, dtype=float)
    tr = np.trace(r)
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * np.sqrt(1.0 + r[i, i] - r[j, j] - r[k, k])
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    q = quat_normalize(np.asarray(q))
    return q if q[0] >= 0.0 else -q
