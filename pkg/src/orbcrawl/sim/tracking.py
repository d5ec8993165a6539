"""Classical trajectory trackers on the full-dynamics simulator.

A plan is anything exposing ``duration``, ``base_position(t, order)``,
``base_rpy(t, order)``, ``ee_position[a](t, order)``, ``thrust(t)`` and
``contact_flags(t)``: a solved ``OcpSolution`` or a plan reloaded from CSV.

Outer loop (default 50 Hz): targets are read from the plan and turned into
joint position targets; inner loop: joint PD at the simulator rate (200 Hz)
with the planned thrust as feed-forward.

* ``pd``: joint targets from converged position IK of every arm.
* ``diffik``: one damped least-squares step per tick from the measured joints.
* ``impedance``: ``diffik`` plus Cartesian stiffness/damping at the
  end-effectors mapped to joint torques, ``J' (K e + D e_dot)``.

Docked arms target the end-effector offset implied by the *planned* base pose
(the arms then push the base toward the plan); swinging arms chase the planned
inertial end-effector position from the *measured* base.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..rigid_body import BodyState, ThrusterCommand
from ..rotations import euler_to_quat, euler_to_rotation, orientation_error, quat_to_euler
from .control import dls_step, solve_ik
from .simulator import SimState, Simulator

CONTROLLERS = ("pd", "diffik", "impedance", "external")
CSV_VERSION = 1


@dataclass(frozen=True)
class TrackerConfig:
    name: str = "diffik"
    rate: float = 50.0  # outer loop [Hz]
    damping: float = 0.05  # DLS damping
    gain: float = 1.0  # fraction of the Cartesian error corrected per tick
    stiffness: float = 1500.0  # impedance [N/m]
    damping_ratio: float = 1.0
    kp: float | None = None  # joint PD overrides
    kd: float | None = None
    thrust_feedforward: bool = True

    def __post_init__(self):
        if self.name not in CONTROLLERS:
            raise ValueError(f"unknown controller {self.name!r}; choose from {CONTROLLERS}")
        if self.rate <= 0.0 or self.stiffness < 0.0 or self.damping < 0.0:
            raise ValueError("rate must be positive, stiffness and damping non-negative")


@dataclass
class TrackingReport:
    t: np.ndarray
    base_error: np.ndarray  # [m]
    base_rot_error: np.ndarray  # [rad]
    ee_error: np.ndarray  # (N, arms) [m]
    controller: str = ""
    records: dict = field(default_factory=dict, repr=False)

    @property
    def mean_base_error(self):
        return float(self.base_error.mean())

    @property
    def max_base_error(self):
        return float(self.base_error.max())

    @property
    def mean_base_rot_error(self):
        return float(self.base_rot_error.mean())

    @property
    def mean_ee_error(self):
        return float(self.ee_error.mean())

    @property
    def max_ee_error(self):
        return float(self.ee_error.max())

    def summary(self):
        return {
            "controller": self.controller,
            "mean_base_error": self.mean_base_error,
            "max_base_error": self.max_base_error,
            "mean_base_rot_error": self.mean_base_rot_error,
            "max_base_rot_error": float(self.base_rot_error.max()),
            "mean_ee_error": self.mean_ee_error,
            "max_ee_error": self.max_ee_error,
            "mean_ee_error_per_arm": [float(v) for v in self.ee_error.mean(axis=0)],
            "samples": int(len(self.t)),
        }

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rec = self.records
        n_arms = self.ee_error.shape[1]
        cols = ["t"]
        for who in ("target", "actual"):
            cols += [f"{who}_{c}" for c in ("x", "y", "z", "roll", "pitch", "yaw")]
        for a in range(n_arms):
            for who in ("target", "actual"):
                cols += [f"{who}_p{a}_{c}" for c in ("x", "y", "z")]
        with open(out / "tracking.csv", "w", newline="") as fh:
            fh.write(f"# orbcrawl tracking v{CSV_VERSION}: {','.join(cols)}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for k, t in enumerate(self.t):
                row = [t, *rec["target_base"][k], *rec["actual_base"][k]]
                for a in range(n_arms):
                    row += [*rec["target_ee"][k, a], *rec["actual_ee"][k, a]]
                w.writerow([repr(float(v)) for v in row])
        with open(out / "tracking_report.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2)
        return out


class ErrorLog:
    """Per-tick target/actual samples accumulated into a ``TrackingReport``."""

    KEYS = ("t", "target_base", "actual_base", "target_ee", "actual_ee", "base_err", "rot_err", "ee_err")

    def __init__(self, sim: Simulator):
        self.sim = sim
        self.rec = {k: [] for k in self.KEYS}

    def record(self, state: SimState, tg):
        rec = self.rec
        ee = self.sim.end_effector_positions(state)
        rec["t"].append(state.time)
        rec["target_base"].append(np.concatenate([tg.base, tg.rpy]))
        rec["actual_base"].append(np.concatenate([state.body.position, quat_to_euler(state.body.quaternion)]))
        rec["target_ee"].append(tg.ee)
        rec["actual_ee"].append(ee)
        rec["base_err"].append(np.linalg.norm(state.body.position - tg.base))
        rec["rot_err"].append(np.linalg.norm(orientation_error(euler_to_quat(tg.rpy), state.body.quaternion)))
        rec["ee_err"].append(np.linalg.norm(ee - tg.ee, axis=1))

    def report(self, name):
        arr = {k: np.asarray(v) for k, v in self.rec.items()}
        return TrackingReport(arr["t"], arr["base_err"], arr["rot_err"], arr["ee_err"], name, records=arr)


class PlanTargets:
    """Samples of a plan at one instant."""

    def __init__(self, plan, t):
        t = min(max(t, 0.0), plan.duration)
        self.t = t
        self.base = np.asarray(plan.base_position(t), float)
        self.rpy = np.asarray(plan.base_rpy(t), float)
        self.rot = euler_to_rotation(self.rpy)
        self.ee = np.array([np.asarray(p(t), float) for p in plan.ee_position])
        self.ee_rate = np.array([np.asarray(p(t, 1), float) for p in plan.ee_position])
        self.base_rate = np.asarray(plan.base_position(t, 1), float)
        self.thrust = np.asarray(plan.thrust(t), float)
        self.contact = np.asarray(plan.contact_flags(t)).reshape(-1).astype(bool)


def initial_state(sim: Simulator, plan) -> SimState:
    """Plan pose at ``t = 0`` with joints solved so the end-effectors sit on the planned points."""
    tg = PlanTargets(plan, 0.0)
    body = BodyState(tg.base, euler_to_quat(tg.rpy), tg.base_rate, np.zeros(3))
    n = sim.n_joints
    q = np.zeros(sim.n_arms * n)
    for a in range(sim.n_arms):
        rel = tg.rot.T @ (tg.ee[a] - tg.base)
        q[a * n:(a + 1) * n], _ = solve_ik(lambda qa, a=a: sim.body_frame_ee(qa, a),
                                           lambda qa, a=a: sim.body_jacobian(qa, a), rel, np.zeros(n))
    state = sim.initial_state(body, q)
    return sim.set_contact(state, tg.contact)


class Tracker:
    """Outer-loop controller producing joint targets and feed-forward torques per tick."""

    def __init__(self, sim: Simulator, cfg: TrackerConfig):
        self.sim, self.cfg = sim, cfg
        self.q_cmd = None

    def relative_targets(self, state: SimState, tg: PlanTargets):
        rot = state.body.rotation
        rel, rel_rate = [], []
        for a in range(self.sim.n_arms):
            if tg.contact[a]:
                rel.append(tg.rot.T @ (tg.ee[a] - tg.base))
                rel_rate.append(tg.rot.T @ (tg.ee_rate[a] - tg.base_rate))
            else:
                rel.append(rot.T @ (tg.ee[a] - state.body.position))
                rel_rate.append(rot.T @ (tg.ee_rate[a] - state.body.velocity))
        return np.array(rel), np.array(rel_rate)

    def command(self, state: SimState, tg: PlanTargets, h):
        """``(q_target, tau_ff)`` for the next outer-loop interval ``h``."""
        cfg, sim, n = self.cfg, self.sim, self.sim.n_joints
        rel, rel_rate = self.relative_targets(state, tg)
        q_t = np.empty(sim.n_arms * n)
        tau = np.zeros(sim.n_arms * n)
        if self.q_cmd is None:
            self.q_cmd = state.q.copy()
        for a in range(sim.n_arms):
            sl = slice(a * n, (a + 1) * n)
            q = state.q[sl]
            if cfg.name == "pd":
                q_t[sl], _ = solve_ik(lambda qa, a=a: sim.body_frame_ee(qa, a),
                                      lambda qa, a=a: sim.body_jacobian(qa, a), rel[a], self.q_cmd[sl],
                                      damping=1e-3, tol=1e-9, max_iter=50)
                continue
            jac = sim.body_jacobian(q, a)
            err = rel[a] - sim.body_frame_ee(q, a)
            q_t[sl] = q + dls_step(jac, cfg.gain * err + rel_rate[a] * h, cfg.damping)
            if cfg.name == "impedance" and cfg.stiffness > 0.0:
                ee_rate = jac @ state.qd[sl]
                d = 2.0 * cfg.damping_ratio * np.sqrt(cfg.stiffness)
                tau[sl] = jac.T @ (cfg.stiffness * err + d * (rel_rate[a] - ee_rate))
        self.q_cmd = q_t
        return q_t, tau


def track(plan, sim: Simulator, cfg: TrackerConfig | None = None, policy=None, duration=None) -> TrackingReport:
    """Run a tracker (or an external ``policy(state, targets) -> (q_target, thrust)``) along ``plan``."""
    cfg = cfg or TrackerConfig()
    if cfg.name == "external" and policy is None:
        raise ValueError("the external controller needs a policy callable")
    h = 1.0 / cfg.rate
    n_sub = int(round(h / sim.dt))
    if abs(n_sub * sim.dt - h) > 1e-9 or n_sub < 1:
        raise ValueError("the outer-loop period must be a multiple of the simulator step")
    duration = plan.duration if duration is None else duration
    n_ticks = int(round(duration * cfg.rate))
    kp, kd = cfg.kp, cfg.kd
    limits = sim.model.thruster_limits
    tracker = Tracker(sim, cfg)

    state = initial_state(sim, plan)
    log = ErrorLog(sim)
    log.record(state, PlanTargets(plan, 0.0))
    for k in range(n_ticks):
        t = k * h
        tg_now = PlanTargets(plan, t)
        state = sim.set_contact(state, tg_now.contact)
        tg_next = PlanTargets(plan, t + h)
        if cfg.name == "external":
            q_t, u = policy(state, tg_next)
            tau_ff = None
        else:
            q_t, tau_ff = tracker.command(state, tg_next, h)
            u = tg_now.thrust if cfg.thrust_feedforward else np.zeros(3)
        thrust = ThrusterCommand.from_signed(u, limits)
        state = sim.pd_step(state, q_t, thrust, n_sub=n_sub, tau_ff=tau_ff, kp=kp, kd=kd)
        log.record(state, PlanTargets(plan, state.time))
    return log.report(cfg.name)
