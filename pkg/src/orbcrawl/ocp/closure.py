"""Forward simulation of the centroidal body under a plan's forces and thrust."""

from __future__ import annotations

import numpy as np

from ..rigid_body import BodyState, ThrusterCommand, base_dynamics, simulate_body
from ..rotations import euler_to_quat
from .transcription import body_rates


def planned_state(sol, t) -> BodyState:
    rpy = sol.base_rpy(t)
    omega = np.asarray(body_rates(rpy, sol.base_rpy(t, 1)))
    return BodyState(sol.base_position(t), euler_to_quat(rpy), sol.base_position(t, 1), omega)


def rollout(sol, model, rate=100.0, t_end=None):
    """RK4 of the base under the planned ``f_i(t)``, contact points and ``u(t)``.

    Returns sample times (every ``1/rate`` s) and simulated positions.
    """
    t_end = sol.duration if t_end is None else t_end
    dt = 1.0 / rate

    def accel(t, s):
        t = min(t, sol.duration)
        forces = np.array([f(t) for f in sol.force])
        points = np.array([p(t) for p in sol.ee_position])
        thrust = ThrusterCommand.from_signed(sol.thrust(t))
        return base_dynamics(s, forces, points, thrust, model)

    times, states = simulate_body(planned_state(sol, 0.0), accel, t_end, dt=dt)
    return times, np.array([s.position for s in states])


def closure_error(sol, model, rate=100.0):
    """Max distance between simulated and planned base positions at every sample."""
    t, pos = rollout(sol, model, rate)
    return float(np.linalg.norm(pos - sol.base_position(t), axis=-1).max())
