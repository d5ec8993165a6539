"""Plan tracking through the environment's observation/action interface."""

from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ..rotations import euler_to_quat, quat_to_rotation
from ..sim.tracking import ErrorLog, PlanTargets, Tracker, TrackerConfig, TrackingReport, initial_state
from ..spline import sample_times
from .environment import CrawlEnv, Targets
from .observation import observation_layout


def plan_targets(env: CrawlEnv, tg: PlanTargets, contact=None, thrust=None) -> Targets:
    quat = euler_to_quat(tg.rpy)
    return Targets(tg.base, quat, tg.ee, env.ee_target_quaternions(quat),
                   tg.contact if contact is None else np.asarray(contact, bool),
                   tg.thrust if thrust is None else np.asarray(thrust, float),
                   base_velocity=tg.base_rate, ee_velocity=tg.ee_rate)


def tracker_policy(env: CrawlEnv, cfg: TrackerConfig | None = None):
    """A classical tracker wrapped as ``obs -> action``; reads the exact state from ``env``.

    Only trackers whose command is a joint-target set qualify (``pd``, ``diffik``).
    """
    cfg = cfg or TrackerConfig(name="diffik")
    if cfg.name not in ("pd", "diffik"):
        raise ValueError("only pd and diffik trackers map onto the action space")
    tracker = Tracker(env.sim, cfg)

    def policy(obs):
        tg = env.targets
        ee_rate = np.zeros_like(tg.ee_position) if tg.ee_velocity is None else tg.ee_velocity
        view = SimpleNamespace(base=tg.base_position, rot=quat_to_rotation(tg.base_quaternion), ee=tg.ee_position,
                               contact=tg.contact, base_rate=tg.base_velocity, ee_rate=ee_rate)
        tracker.sim = env.sim
        q_t, _ = tracker.command(env.state, view, env.h)
        return np.concatenate([q_t, tg.thrust if cfg.thrust_feedforward else np.zeros(3)])

    return policy


def hold_policy(env: CrawlEnv):
    """Joint targets equal to the observed joint angles, no thrust."""
    sl = observation_layout(env.n_arms, env.n_joints)["joint_position"]
    return lambda obs: np.concatenate([obs[sl], np.zeros(3)])


def tracking_rollout(env: CrawlEnv, policy, plan, duration=None) -> TrackingReport:
    """Feed plan targets sampled at the control rate to ``policy`` and record the tracking errors."""
    h = env.h
    duration = plan.duration if duration is None else min(duration, plan.duration)
    times = sample_times(duration, env.cfg.control_rate)
    state = initial_state(env.sim, plan)
    tg0 = PlanTargets(plan, 0.0)
    env.reset_to(state, plan_targets(env, PlanTargets(plan, h), tg0.contact, tg0.thrust), max_steps=len(times) - 1)
    log = ErrorLog(env.sim)
    log.record(env.state, tg0)
    for t in times[:-1]:
        now, nxt = PlanTargets(plan, t), PlanTargets(plan, t + h)
        env.set_targets(plan_targets(env, nxt, now.contact, now.thrust))
        obs = env.observe()
        action = np.asarray(policy(obs), float)
        if action.shape != (env.action_size,):
            raise ValueError(f"policy returned shape {action.shape}, expected ({env.action_size},)")
        tr = env.step(action)
        log.record(env.state, PlanTargets(plan, env.state.time))
        if tr.terminated:
            break
    return log.report("policy")
