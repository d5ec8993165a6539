"""Steppable tracking environment over the full-dynamics simulator.

Reset/step contract::

    env = CrawlEnv(EnvConfig(), seed=0)
    obs = env.reset()
    tr = env.step(action)        # EnvTransition(obs, reward, terminated, truncated, info)

``action`` is ``[q* (arms*joints) rad, u (3) N]``: absolute joint targets for the
200 Hz PD loop and a signed body-frame thrust.  Both are clamped.  A body
collision terminates; the episode truncates after ``episode_length``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..heightmap import HeightMap
from ..kinematics import chain_frames
from ..ocp.problem import docked_height
from ..rigid_body import BodyState, ThrusterCommand
from ..robot import RobotModel
from ..rotations import orientation_error, quat_multiply, rotation_to_quat
from ..sim.simulator import SimState, Simulator
from .config import EnvConfig
from .curriculum import Curriculum
from .observation import build_observation, observation_size
from .reward import RewardBreakdown, RewardInputs, compute_reward


class EpisodeDone(RuntimeError):
    pass


@dataclass
class Targets:
    base_position: np.ndarray
    base_quaternion: np.ndarray
    ee_position: np.ndarray  # (arms, 3)
    ee_quaternion: np.ndarray  # (arms, 4)
    contact: np.ndarray  # (arms,) docking flags applied at the next step
    thrust: np.ndarray = field(default_factory=lambda: np.zeros(3))  # planned feed-forward, not observed
    base_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ee_velocity: np.ndarray | None = None


@dataclass
class EnvTransition:
    observation: np.ndarray
    reward: RewardBreakdown
    terminated: bool
    truncated: bool
    info: dict

    @property
    def done(self):
        return self.terminated or self.truncated


@dataclass(frozen=True)
class ResetSample:
    mass_scale: float
    base_offset: np.ndarray
    joint_offset: np.ndarray  # additive [rad]
    joint_scale: np.ndarray  # relative jitter of the default angles


def sample_reset(rng, cfg: EnvConfig, n_joints_total) -> ResetSample:
    r = cfg.randomization
    if not r.enabled:
        return ResetSample(1.0, np.zeros(3), np.zeros(n_joints_total), np.zeros(n_joints_total))
    return ResetSample(
        float(rng.uniform(*r.mass_scale)),
        rng.uniform(*r.base_position, size=3),
        rng.uniform(*r.joint_position, size=n_joints_total),
        rng.uniform(*r.joint_scale, size=n_joints_total),
    )


def sample_ball(rng, radius, size=None):
    """Uniform samples inside a ball of ``radius``."""
    shape = (3,) if size is None else (size, 3)
    d = rng.normal(size=shape)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    r = radius * rng.uniform(size=shape[:-1] + (1,)) ** (1.0 / 3.0)
    return d * r if size is not None else (d * r).reshape(3)


def clamp_action(action, model: RobotModel, thrusters=True):
    """Joint targets clipped to the joint limits, thrust to the per-axis limits."""
    nj = model.n_arms * model.n_joints
    a = np.asarray(action, float)
    if a.shape != (nj + 3,):
        raise ValueError(f"action must have shape ({nj + 3},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("action contains non-finite entries")
    q = np.clip(a[:nj], np.tile(model.joint_lower, model.n_arms), np.tile(model.joint_upper, model.n_arms))
    lim = model.signed_thrust_limits
    u = np.clip(a[nj:], -lim[:, 0], lim[:, 1]) if thrusters else np.zeros(3)
    return np.concatenate([q, u])


class CrawlEnv:
    def __init__(self, cfg: EnvConfig | None = None, model: RobotModel | None = None,
                 hmap: HeightMap | None = None, seed=None):
        self.cfg = cfg or EnvConfig()
        self.base_model = model or RobotModel.load(self.cfg.model)
        self.hmap = hmap or HeightMap.from_config(self.cfg.map)
        self.rng = np.random.default_rng(seed)
        self.curriculum = Curriculum(self.cfg.curriculum)
        self.n_arms, self.n_joints = self.base_model.n_arms, self.base_model.n_joints
        self.nj = self.n_arms * self.n_joints
        self.obs_size = observation_size(self.n_arms, self.n_joints)
        self.action_size = self.nj + 3
        self.h = 1.0 / self.cfg.control_rate
        self.sim = Simulator(self.base_model, dt=1.0 / self.cfg.sim_rate)
        self._ee_rel_quat = np.array([self._nominal_ee_quat(a) for a in range(self.n_arms)])
        self.state: SimState | None = None
        self.targets: Targets | None = None
        self.training = True
        self.noisy = self.cfg.noise.enabled
        self.max_steps = self.cfg.max_steps
        self.done = True
        self.steps = 0

    # -------------------------------------------------------------- geometry
    def _nominal_ee_quat(self, arm):
        _, rot = self.sim.forward_kinematics(np.zeros(self.n_joints), BodyState(), arm)
        return rotation_to_quat(rot)

    def ee_poses(self, state=None):
        """Measured ``(arms, 7)`` end-effector poses (position, link quaternion)."""
        state = state or self.state
        out = np.empty((self.n_arms, 7))
        for a in range(self.n_arms):
            p, rot = self.sim.forward_kinematics(state.joints(a, self.n_joints), state.body, a)
            out[a, :3], out[a, 3:] = p, rotation_to_quat(rot)
        return out

    def ee_target_quaternions(self, base_quat):
        """Desired link orientations: the nominal body-frame orientation carried by the base."""
        return np.array([quat_multiply(base_quat, q) for q in self._ee_rel_quat])

    def collisions(self, state=None):
        """``(n_c, b_c)``: arm joints (end-effectors excluded) and base-box corners under the surface."""
        state = state or self.state
        body, rot = state.body, state.body.rotation
        model = self.sim.model
        n_c = 0
        for a in range(self.n_arms):
            _, origins, _ = chain_frames(model.chain, state.joints(a, self.n_joints), model.mount_positions[a],
                                         model.mount_rotation(a))
            pts = body.position + origins[1:] @ rot.T
            n_c += int(np.sum(self.hmap.clearance(pts, 0.0) < 0.0))
        half = np.asarray(self.cfg.body_half_extents)
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], float)
        corners = body.position + (signs * half) @ rot.T
        b_c = int(np.any(self.hmap.clearance(corners, 0.0) < 0.0))
        return n_c, b_c

    # ----------------------------------------------------------------- reset
    def nominal_base_position(self):
        z = docked_height(self.base_model, self.hmap, (0.0, 0.0)) + self.cfg.hover_height
        return np.array([0.0, 0.0, z])

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        s = sample_reset(self.rng, self.cfg, self.nj)
        model = self.base_model.with_mass(self.base_model.mass * s.mass_scale) if s.mass_scale != 1.0 else self.base_model
        self.sim = Simulator(model, dt=1.0 / self.cfg.sim_rate)
        self.mass = model.mass
        nominal = self.nominal_base_position()
        offsets = np.tile(model.chain.zero_offsets, self.n_arms)
        q = s.joint_offset + s.joint_scale * offsets
        q = np.clip(q, np.tile(model.joint_lower, self.n_arms), np.tile(model.joint_upper, self.n_arms))
        body = BodyState(nominal + s.base_offset)
        self.state = self.sim.initial_state(body, q)
        self._anchor_base = nominal
        self._anchor_ee = self.ee_poses()[:, :3]
        self.training, self.noisy = True, self.cfg.noise.enabled
        self.max_steps = self.cfg.max_steps
        self.targets = self._sample_targets(resample_base=True)
        self._begin()
        return self.observe()

    def reset_to(self, state: SimState, targets: Targets, max_steps=None, noisy=None) -> np.ndarray:
        """Start an evaluation episode from a given state with externally driven targets."""
        if self.sim.model is not self.base_model:
            self.sim = Simulator(self.base_model, dt=1.0 / self.cfg.sim_rate)
        self.state = state
        self.targets = targets
        self.training = False
        self.noisy = self.cfg.noise.enabled and self.cfg.noise.evaluation if noisy is None else noisy
        self.max_steps = self.cfg.max_steps if max_steps is None else int(max_steps)
        self.mass = self.sim.model.mass
        self._begin()
        return self.observe()

    def _begin(self):
        self.prev_action = np.concatenate([self.state.q, np.zeros(3)])
        self.steps = 0
        self.done = False
        self._errors = []
        self._pending_changes = sorted(t for t in self.cfg.target_changes if t < self.cfg.episode_length)

    def _sample_targets(self, resample_base):
        if resample_base:
            base = self._anchor_base + sample_ball(self.rng, self.curriculum.range)
            base_quat = np.array([1.0, 0.0, 0.0, 0.0])
        else:
            base, base_quat = self.targets.base_position, self.targets.base_quaternion
        ee = self._anchor_ee + sample_ball(self.rng, self.cfg.curriculum.ee_radius, self.n_arms)
        return Targets(base, base_quat, ee, self.ee_target_quaternions(base_quat), np.zeros(self.n_arms, bool))

    def set_targets(self, targets: Targets):
        self.targets = targets

    # ------------------------------------------------------------------ step
    def observe(self) -> np.ndarray:
        return build_observation(self.state, self.ee_poses(), self.targets, self.prev_action,
                                 self.cfg.noise if self.noisy else None, self.rng)

    def step(self, action) -> EnvTransition:
        if self.state is None:
            raise EpisodeDone("call reset() before step()")
        if self.done:
            raise EpisodeDone("episode is over; call reset()")
        a = clamp_action(action, self.sim.model, self.cfg.thrusters)
        q_t, u = a[:self.nj], a[self.nj:]
        old = self.state
        state = self.sim.set_contact(old, self.targets.contact)
        thrust = ThrusterCommand.from_signed(u, self.sim.model.thruster_limits)
        state = self.sim.pd_step(state, q_t, thrust, n_sub=self.cfg.substeps)
        self.state = state
        self.steps += 1

        ee = self.ee_poses()
        n_c, b_c = self.collisions()
        tg = self.targets
        inputs = RewardInputs(
            state.body.position, state.body.quaternion, tg.base_position, tg.base_quaternion,
            ee[:, :3], ee[:, 3:], tg.ee_position, tg.ee_quaternion,
            state.qd, state.tau, (state.qd - old.qd) / self.h,
            (state.body.velocity - old.body.velocity) / self.h, (state.body.omega - old.body.omega) / self.h,
            q_t, self.prev_action[:self.nj], u, n_c, b_c,
        )
        reward = compute_reward(inputs, self.cfg.rewards)
        base_err = float(np.linalg.norm(tg.base_position - state.body.position))
        self._errors.append(base_err)
        self.prev_action = a

        if self.training:
            while self._pending_changes and state.time >= self._pending_changes[0] - 1e-9:
                self._pending_changes.pop(0)
                self.targets = self._sample_targets(resample_base=False)

        terminated = b_c > 0
        truncated = not terminated and self.steps >= self.max_steps
        self.done = terminated or truncated
        info = {
            "time": state.time, "base_error": base_err,
            "base_rot_error": float(np.linalg.norm(orientation_error(tg.base_quaternion, state.body.quaternion))),
            "ee_error": np.linalg.norm(ee[:, :3] - tg.ee_position, axis=1),
            "n_collisions": n_c, "body_collision": b_c, "clamped_action": a,
        }
        if self.done:
            info["episode_base_error"] = float(np.mean(self._errors))
            if self.training:
                info["curriculum_grew"] = self.curriculum.record(info["episode_base_error"])
        return EnvTransition(self.observe(), reward, terminated, truncated, info)


class BatchEnv:
    """``n`` independent environments with per-instance seeds; finished ones auto-reset."""

    def __init__(self, n, cfg: EnvConfig | None = None, seeds=None, workers=1, **kw):
        seeds = list(range(n)) if seeds is None else list(seeds)
        if len(seeds) != n:
            raise ValueError("need one seed per environment")
        self.seeds = seeds
        self.envs = [CrawlEnv(cfg, seed=s, **kw) for s in seeds]
        self.workers = int(workers)

    def __len__(self):
        return len(self.envs)

    def _map(self, fn, items):
        if self.workers <= 1:
            return [fn(*it) for it in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(lambda it: fn(*it), items))

    def reset(self):
        return np.stack(self._map(lambda env, s: env.reset(s), zip(self.envs, self.seeds)))

    def step(self, actions):
        actions = np.asarray(actions, float)
        if actions.shape[0] != len(self.envs):
            raise ValueError("one action row per environment")

        def one(env, act):
            tr = env.step(act)
            if tr.done:
                tr.info["final_observation"] = tr.observation
                tr = replace(tr, observation=env.reset())
            return tr

        trs = self._map(one, zip(self.envs, actions))
        return (np.stack([t.observation for t in trs]), np.array([t.reward.total for t in trs]),
                np.array([t.terminated for t in trs]), np.array([t.truncated for t in trs]), [t.info for t in trs])
