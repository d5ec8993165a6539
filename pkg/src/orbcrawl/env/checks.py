"""Self-checks of an environment configuration (used by ``orbcrawl envcheck``)."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from ..rigid_body import BodyState
from ..rotations import quat_conjugate, quat_multiply, quat_to_rotvec, random_quaternion
from ..sim.simulator import SimState
from .config import EnvConfig
from .curriculum import curriculum_update
from .environment import CrawlEnv, Targets
from .observation import build_observation, observation_layout, observation_size
from .reward import RewardInputs, compute_reward


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _reward_inputs(n_arms, nj, base_err=0.0, ee_err=0.0):
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    ee_t = np.zeros((n_arms, 3))
    ee_t[0, 0] = ee_err
    z = np.zeros(nj)
    return RewardInputs(np.zeros(3), ident, np.array([base_err, 0.0, 0.0]), ident,
                        np.zeros((n_arms, 3)), np.tile(ident, (n_arms, 1)), ee_t, np.tile(ident, (n_arms, 1)),
                        z, z, z, np.zeros(3), np.zeros(3), z, z, np.zeros(3))


def check_monotonicity(cfg: EnvConfig, n_arms=4, nj=24):
    errs = np.linspace(1e-3, 1.0, 60)
    body = [compute_reward(_reward_inputs(n_arms, nj, base_err=e), cfg.rewards).body for e in errs]
    ee = [compute_reward(_reward_inputs(n_arms, nj, ee_err=e), cfg.rewards).ee for e in errs]
    ok = bool(np.all(np.diff(body) < 0.0) and np.all(np.diff(ee) < 0.0))
    return CheckResult("reward monotonicity", ok, f"R_body {body[0]:.3f} -> {body[-1]:.3f}")


def check_summation(cfg: EnvConfig, rng, n=2000, n_arms=4, nj=24):
    for _ in range(n):
        x = replace(_reward_inputs(n_arms, nj, rng.uniform(0, 1), rng.uniform(0, 1)),
                    base_quaternion=random_quaternion(rng), joint_velocity=rng.normal(size=nj),
                    joint_torque=rng.normal(size=nj), joint_acceleration=rng.normal(size=nj),
                    thrust=rng.normal(size=3), n_collisions=int(rng.integers(0, 4)), body_collision=int(rng.integers(0, 2)))
        r = compute_reward(x, cfg.rewards)
        if r.total != math.fsum(r.parts):
            return CheckResult("reward summation", False, "total differs from the sum of parts")
    return CheckResult("reward summation", True, f"{n} random breakdowns")


def check_noise(cfg: EnvConfig, rng, n=10_000, n_arms=4, n_joints=6):
    noise = cfg.noise
    nj = n_arms * n_joints
    state = SimState(BodyState(rng.normal(size=3), random_quaternion(rng), rng.normal(size=3), rng.normal(size=3)),
                     rng.uniform(-1, 1, nj), rng.uniform(-1, 1, nj), np.zeros(n_arms, bool), np.zeros((n_arms, 3)))
    ee = np.hstack([rng.normal(size=(n_arms, 3)), np.tile([1.0, 0, 0, 0], (n_arms, 1))])
    tg = Targets(np.zeros(3), np.array([1.0, 0, 0, 0]), ee[:, :3], ee[:, 3:], np.zeros(n_arms, bool))
    lay = observation_layout(n_arms, n_joints)
    clean = build_observation(state, ee, tg, np.zeros(nj + 3))
    bounds = {"base_position": noise.base_position, "base_linear_velocity": noise.linear_velocity,
              "base_angular_velocity": noise.angular_velocity, "joint_position": noise.joint_position,
              "joint_velocity": noise.joint_velocity}
    qs = lay["base_quaternion"]
    for _ in range(n):
        obs = build_observation(state, ee, tg, np.zeros(nj + 3), noise, rng)
        for k, (lo, hi) in bounds.items():
            d = obs[lay[k]] - clean[lay[k]]
            if d.min() < lo - 1e-12 or d.max() > hi + 1e-12:
                return CheckResult("noise bounds", False, f"{k} out of range")
        rv = quat_to_rotvec(quat_multiply(quat_conjugate(clean[qs]), obs[qs]))
        lo, hi = noise.base_orientation
        if rv.min() < lo - 1e-9 or rv.max() > hi + 1e-9:
            return CheckResult("noise bounds", False, "base orientation out of range")
    return CheckResult("noise bounds", True, f"{n} samples")


def check_curriculum(cfg: EnvConfig):
    c = cfg.curriculum
    ok = (curriculum_update([0.8 * c.threshold], 0.0, c) == c.step
          and curriculum_update([1.2 * c.threshold], 0.0, c) == 0.0)
    return CheckResult("curriculum rule", bool(ok), f"threshold {c.threshold} m, step {c.step} m")


def check_episode(cfg: EnvConfig, seed):
    env = CrawlEnv(cfg, seed=seed)
    env.reset()
    steps, tr = 0, None
    while tr is None or not tr.done:
        tr = env.step(np.concatenate([env.state.q, np.zeros(3)]))
        steps += 1
    expected = cfg.max_steps
    ok = tr.terminated or steps == expected
    return CheckResult("episode accounting", bool(ok),
                       f"{steps} steps ({'terminated' if tr.terminated else 'timeout'}), expected {expected}")


def transcript_hash(cfg: EnvConfig, seed, steps):
    """SHA-256 over the observations and rewards of a seeded random-action rollout."""
    env = CrawlEnv(cfg, seed=seed)
    h = hashlib.sha256(env.reset().tobytes())
    act_rng = np.random.default_rng(seed)
    for _ in range(steps):
        a = np.concatenate([env.state.q + 0.05 * act_rng.normal(size=env.nj), act_rng.normal(size=3)])
        tr = env.step(a)
        h.update(tr.observation.tobytes())
        h.update(np.array(tr.reward.parts + (tr.reward.total,)).tobytes())
        if tr.done:
            h.update(env.reset().tobytes())
    return h.hexdigest()


def run_checks(cfg: EnvConfig | None = None, seed=0, steps=50):
    cfg = cfg or EnvConfig()
    rng = np.random.default_rng(seed)
    results = [
        CheckResult("observation size", observation_size(4, 6) == 151, "151 for 4 arms x 6 joints"),
        check_monotonicity(cfg),
        check_summation(cfg, rng),
        check_noise(cfg, rng),
        check_curriculum(cfg),
        check_episode(replace(cfg, noise=replace(cfg.noise, enabled=False)), seed),
    ]
    a, b = transcript_hash(cfg, seed, steps), transcript_hash(cfg, seed, steps)
    results.append(CheckResult("seeded determinism", a == b, a[:16]))
    return results, a
