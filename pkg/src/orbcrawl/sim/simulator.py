"""Stepping interface over the multibody model."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..kinematics import chain_frames, position_jacobian
from ..rigid_body import DEFAULT_DT, BodyState, ThrusterCommand
from ..robot import RobotModel
from . import multibody as mb


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimState:
    body: BodyState
    q: np.ndarray  # (arms * joints,) [rad]
    qd: np.ndarray  # [rad/s]
    contact: np.ndarray  # (arms,) bool, docked flags
    dock_points: np.ndarray  # (arms, 3) inertial anchor of each docked end-effector
    thrust_impulse: float = 0.0  # accumulated sum of thruster magnitudes times dt [N s]
    time: float = 0.0
    tau: np.ndarray | None = field(default=None, compare=False)  # last applied torques
    contact_force: np.ndarray | None = field(default=None, compare=False)  # (arms, 3) docking forces on the robot

    def __post_init__(self):
        for name in ("q", "qd", "dock_points"):
            val = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(val)):
                raise SimulationError(f"non-finite {name}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "contact", np.asarray(self.contact, dtype=bool))

    def joints(self, arm, n):
        return self.q[arm * n:(arm + 1) * n]

    def vector(self):
        b = self.body
        return np.concatenate([b.position, b.quaternion, self.q, b.velocity, b.omega, self.qd])


class Simulator:
    """Full-dynamics robot: free-floating base, articulated arms, bilateral docking."""

    def __init__(self, model: RobotModel, dt: float = DEFAULT_DT):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.model = model
        self.dt = float(dt)
        self.params = mb.model_params(model)
        self.n_arms, self.n_joints = model.n_arms, model.n_joints
        self.nq = 7 + self.n_arms * self.n_joints
        self.kp = np.tile(np.asarray(model.kp, float), self.n_arms)
        self.kd = np.tile(np.asarray(model.kd, float), self.n_arms)
        self.tau_limit = np.tile(np.asarray(model.torque_limits, float), self.n_arms)

    # ------------------------------------------------------------------ state
    def initial_state(self, body: BodyState | None = None, q=None, contact=None) -> SimState:
        body = body or BodyState()
        q = np.zeros(self.n_arms * self.n_joints) if q is None else np.asarray(q, float)
        s = SimState(body, q, np.zeros_like(q), np.zeros(self.n_arms, bool), np.zeros((self.n_arms, 3)))
        return self.set_contact(s, np.zeros(self.n_arms, bool) if contact is None else contact)

    def _from_vector(self, y, state: SimState, **kw) -> SimState:
        y = np.asarray(y)
        if not np.all(np.isfinite(y)):
            raise SimulationError("simulation diverged (singular mass matrix or unstable gains)")
        nq = self.nq
        body = BodyState(y[0:3], y[3:7], y[nq:nq + 3], y[nq + 3:nq + 6])
        return replace(state, body=body, q=y[7:nq], qd=y[nq + 6:], **kw)

    def set_contact(self, state: SimState, flags) -> SimState:
        """Dock arms whose flag turns on at their current end-effector position; undock the others."""
        flags = np.asarray(flags, dtype=bool)
        ee = self.end_effector_positions(state)
        pts = np.where((flags & ~state.contact)[:, None], ee, state.dock_points)
        return replace(state, contact=flags, dock_points=pts)

    # --------------------------------------------------------------- stepping
    def step(self, state: SimState, tau, thrust: ThrusterCommand | None = None, dt=None) -> SimState:
        """One RK4 step under fixed joint torques and thrust."""
        n = self.n_arms * self.n_joints
        zeros = np.zeros(n)
        return self._advance(state, zeros, np.asarray(tau, float), zeros, zeros, thrust, dt or self.dt, 1)

    def pd_step(self, state: SimState, q_target, thrust=None, n_sub=1, tau_ff=None, kp=None, kd=None, dt=None):
        """``n_sub`` steps of the joint PD loop toward ``q_target`` (plus optional feed-forward torques)."""
        n = self.n_arms * self.n_joints
        tau_ff = np.zeros(n) if tau_ff is None else np.asarray(tau_ff, float)
        kp = self.kp if kp is None else np.broadcast_to(np.asarray(kp, float), (n,))
        kd = self.kd if kd is None else np.broadcast_to(np.asarray(kd, float), (n,))
        q_target = np.clip(np.asarray(q_target, float), np.tile(self.model.joint_lower, self.n_arms),
                           np.tile(self.model.joint_upper, self.n_arms))
        return self._advance(state, q_target, tau_ff, kp, kd, thrust, dt or self.dt, int(n_sub))

    def _advance(self, state, q_target, tau_ff, kp, kd, thrust, dt, n_sub):
        thrust = thrust or ThrusterCommand()
        y, tau, lam = mb.advance(self.params, state.vector(), q_target, tau_ff, kp, kd, self.tau_limit,
                                 thrust.signed, state.contact, state.dock_points, dt, n_sub)
        impulse = state.thrust_impulse + float(thrust.magnitudes.sum()) * dt * n_sub
        return self._from_vector(y, state, thrust_impulse=impulse, time=state.time + dt * n_sub,
                                 tau=np.asarray(tau), contact_force=np.asarray(lam))

    # ------------------------------------------------------------ kinematics
    def forward_kinematics(self, q_arm, body: BodyState, arm: int):
        """End-effector position and link-6 orientation of one arm, inertial frame."""
        rots, _, ee = chain_frames(self.model.chain, q_arm, self.model.mount_positions[arm],
                                   self.model.mount_rotation(arm))
        rot = body.rotation
        return body.position + rot @ ee, rot @ rots[-1]

    def body_jacobian(self, q_arm, arm: int):
        """Body-frame end-effector position Jacobian of one arm (3 x joints)."""
        return position_jacobian(self.model.chain, q_arm, self.model.mount_positions[arm],
                                 self.model.mount_rotation(arm))

    def body_frame_ee(self, q_arm, arm: int):
        return chain_frames(self.model.chain, q_arm, self.model.mount_positions[arm],
                            self.model.mount_rotation(arm))[2]

    def end_effector_positions(self, state: SimState):
        return np.asarray(mb._ee_positions(self.params, state.vector()[:self.nq]))

    # ------------------------------------------------------------ bookkeeping
    def mass_matrix(self, state: SimState):
        return np.asarray(mb._mass_matrix(self.params, state.vector()[:self.nq]))

    def linear_momentum(self, state: SimState):
        y = state.vector()
        return np.asarray(mb._momentum(self.params, y[:self.nq], y[self.nq:]))

    def kinetic_energy(self, state: SimState):
        y = state.vector()
        return float(mb._energy(self.params, y[:self.nq], y[self.nq:]))

    def center_of_mass(self, state: SimState):
        return np.asarray(mb._com(self.params, state.vector()[:self.nq]))

    @property
    def total_mass(self):
        return self.model.mass
