"""Centroidal single-body dynamics of the free-flyer base.

Frames: ``position``/``velocity`` and contact forces/points are inertial;
``omega``, thrust and the external torque are body-frame quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .robot import THRUSTER_AXES, RobotModel
from .rotations import quat_derivative, quat_normalize, quat_to_rotation

DEFAULT_DT = 0.005


@dataclass(frozen=True)
class BodyState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("position", "quaternion", "velocity", "omega"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(value)):
                raise ValueError(f"non-finite {name}")
            object.__setattr__(self, name, value)
        if abs(np.linalg.norm(self.quaternion) - 1.0) > 1e-6:
            raise ValueError("attitude quaternion must be unit-norm")

    @property
    def rotation(self):
        return quat_to_rotation(self.quaternion)

    def as_vector(self):
        return np.concatenate([self.position, self.quaternion, self.velocity, self.omega])

    @classmethod
    def from_vector(cls, x, canonical=True):
        x = np.asarray(x, dtype=float)
        q = quat_normalize(x[3:7]) if canonical else x[3:7] / np.linalg.norm(x[3:7])
        return cls(x[0:3], q, x[7:10], x[10:13])


@dataclass(frozen=True)
class ThrusterCommand:
    """Six non-negative thruster magnitudes, order ``+x, -x, +y, -y, +z, -z``."""

    magnitudes: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=float)
        if mags.shape != (6,):
            raise ValueError("thruster command needs six magnitudes")
        if np.any(mags < 0.0):
            raise ValueError("thrusters can only push: magnitudes must be >= 0")
        object.__setattr__(self, "magnitudes", mags)

    @property
    def signed(self):
        """Net body-frame force ``u`` (3-vector)."""
        return THRUSTER_AXES.T @ self.magnitudes

    @classmethod
    def from_signed(cls, u, limits=None):
        """Split a signed force into the opposing thruster pairs.

        Only one thruster of each pair fires; ``limits`` (6,) clips each one.
        """
        u = np.asarray(u, dtype=float)
        mags = np.empty(6)
        mags[0::2] = np.maximum(u, 0.0)
        mags[1::2] = np.maximum(-u, 0.0)
        if limits is not None:
            mags = np.minimum(mags, limits)
        return cls(mags)

    def within(self, limits):
        return bool(np.all(self.magnitudes <= np.asarray(limits) + 1e-12))


def base_dynamics(
    state: BodyState,
    contact_forces: Sequence,
    contact_points: Sequence,
    thrust: ThrusterCommand | None,
    model: RobotModel,
    external_torque=None,
    mass=None,
    inertia=None,
):
    """Linear and angular acceleration of the centroidal body.

    ``m a = sum f_i + R u`` and
    ``I w_dot + w x I w = R^T sum (p_i - d_b) x f_i + T_e``,
    with the body-frame inertia ``I`` of the nominal configuration.
    """
    mass = model.mass if mass is None else mass
    inertia = model.centroidal_inertia if inertia is None else np.asarray(inertia)
    forces = np.zeros((0, 3)) if len(contact_forces) == 0 else np.atleast_2d(np.asarray(contact_forces, float))
    points = np.zeros((0, 3)) if len(contact_points) == 0 else np.atleast_2d(np.asarray(contact_points, float))
    if len(forces) not in (0, model.n_arms) or len(points) != len(forces):
        raise ValueError("need one force and one contact point per arm")
    if np.linalg.cond(inertia) > 1e12:
        raise ValueError("inertia matrix is singular")
    rot = state.rotation
    u = np.zeros(3) if thrust is None else thrust.signed
    torque_e = np.zeros(3) if external_torque is None else np.asarray(external_torque, dtype=float)

    lin = (forces.sum(axis=0) + rot @ u) / mass
    # moment arm from the CoM to each contact point: (p_i - d_b) x f_i
    torque_world = np.cross(points - state.position, forces).sum(axis=0) if len(forces) else np.zeros(3)
    torque_body = rot.T @ torque_world + torque_e
    w = state.omega
    ang = np.linalg.solve(inertia, torque_body - np.cross(w, inertia @ w))
    return lin, ang


def _derivative(state: BodyState, lin, ang):
    return np.concatenate([state.velocity, quat_derivative(state.quaternion, state.omega), lin, ang])


def integrate_state(state: BodyState, accelerations, dt=DEFAULT_DT):
    """One RK4 step.

    ``accelerations`` is either a fixed ``(linear, angular)`` pair or a
    callable ``state -> (linear, angular)`` re-evaluated at each stage.
    The quaternion is renormalised at every stage.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    accel: Callable = accelerations if callable(accelerations) else (lambda _s: accelerations)

    def f(x):
        s = BodyState.from_vector(x, canonical=False)
        lin, ang = accel(s)
        return _derivative(s, np.asarray(lin, float), np.asarray(ang, float))

    x0 = state.as_vector()
    k1 = f(x0)
    k2 = f(_renorm(x0 + 0.5 * dt * k1))
    k3 = f(_renorm(x0 + 0.5 * dt * k2))
    k4 = f(_renorm(x0 + dt * k3))
    x1 = x0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return BodyState.from_vector(x1)


def _renorm(x):
    # no sign canonicalisation between stages: the stage slopes must refer to the same hemisphere
    x = x.copy()
    x[3:7] /= np.linalg.norm(x[3:7])
    return x


def simulate_body(state: BodyState, accel_fn, duration, dt=DEFAULT_DT, t0=0.0):
    """Integrate ``accel_fn(t, state)`` over ``duration``; returns times and states."""
    n = int(round(duration / dt))
    states = [state]
    times = [t0]
    for k in range(n):
        t = t0 + k * dt
        # the stage time is taken at the step start plus the RK4 stage offset
        stage = _StageClock(t, dt)
        state = integrate_state(state, lambda s, st=stage: accel_fn(st.next(), s), dt)
        states.append(state)
        times.append(t0 + (k + 1) * dt)
    return np.array(times), states


class _StageClock:
    """Yields the RK4 stage times t, t+dt/2, t+dt/2, t+dt in call order."""

    def __init__(self, t, dt):
        self._times = iter((t, t + 0.5 * dt, t + 0.5 * dt, t + dt))

    def next(self):
        return next(self._times)
