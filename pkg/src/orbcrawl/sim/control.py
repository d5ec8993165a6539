"""Joint-space PD law and damped least-squares inverse kinematics."""

from __future__ import annotations

import numpy as np


def pd_joint_controller(q_target, q, qd, kp, kd, limit=None):
    """``tau = Kp (q* - q) - Kd q_dot``, clipped to ``+-limit``."""
    kp, kd = np.asarray(kp, float), np.asarray(kd, float)
    if np.any(kp <= 0.0) or np.any(kd < 0.0):
        raise ValueError("PD gains must be positive")
    tau = kp * (np.asarray(q_target, float) - np.asarray(q, float)) - kd * np.asarray(qd, float)
    if limit is not None:
        tau = np.clip(tau, -np.asarray(limit, float), np.asarray(limit, float))
    return tau


def dls_step(jac, err, damping):
    """Damped least-squares solution of ``J dq = err``."""
    jj = jac @ jac.T + damping**2 * np.eye(jac.shape[0])
    return jac.T @ np.linalg.solve(jj, err)


def solve_ik(fk, jac_fn, target, q0, damping=0.01, tol=1e-10, max_iter=100):
    """Position IK by repeated DLS steps from ``q0``; returns ``(q, residual)``."""
    q = np.array(q0, dtype=float)
    err = target - fk(q)
    for _ in range(max_iter):
        if np.linalg.norm(err) < tol:
            break
        q = q + dls_step(jac_fn(q), err, damping)
        err = target - fk(q)
    return q, float(np.linalg.norm(err))
