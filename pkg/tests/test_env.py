import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcrawl.env import (
    BatchEnv,
    CrawlEnv,
    Curriculum,
    CurriculumConfig,
    EnvConfig,
    EpisodeDone,
    ObservationNoise,
    Randomization,
    RewardInputs,
    RewardWeights,
    Targets,
    build_observation,
    clamp_action,
    compute_reward,
    curriculum_update,
    hold_policy,
    load_ppo_config,
    observation_layout,
    observation_size,
    sample_reset,
    tracker_policy,
    tracking_rollout,
)
from orbcrawl.rigid_body import BodyState
from orbcrawl.rotations import orientation_error, quat_conjugate, quat_multiply, quat_to_rotvec, random_quaternion
from orbcrawl.sim import SimState

QUIET = EnvConfig(randomization=Randomization(enabled=False), noise=ObservationNoise(enabled=False))


@pytest.fixture(scope="module")
def env():
    return CrawlEnv(QUIET, seed=0)


def _hold(env):
    return np.concatenate([env.state.q, np.zeros(3)])


def _inputs(base_err=0.0, ee_err=0.0, **kw):
    ident = np.array([1.0, 0.0, 0.0, 0.0])
    d = dict(
        base_position=np.zeros(3), base_quaternion=ident,
        target_base_position=np.array([base_err, 0.0, 0.0]), target_base_quaternion=ident,
        ee_position=np.zeros((4, 3)), ee_quaternion=np.tile(ident, (4, 1)),
        target_ee_position=np.array([[ee_err, 0.0, 0.0]] + [[0.0, 0.0, 0.0]] * 3),
        target_ee_quaternion=np.tile(ident, (4, 1)),
        joint_velocity=np.zeros(24), joint_torque=np.zeros(24), joint_acceleration=np.zeros(24),
        base_linear_acceleration=np.zeros(3), base_angular_acceleration=np.zeros(3),
        joint_targets=np.zeros(24), prev_joint_targets=np.zeros(24), thrust=np.zeros(3),
    )
    d.update(kw)
    return RewardInputs(**d)


# ---------------------------------------------------------------- observation
def test_observation_dimension():
    assert observation_size(4, 6) == 151
    lay = observation_layout(4, 6)
    assert sum(s.stop - s.start for s in lay.values()) == 151
    assert lay["target_ee_pose"].stop == 151
    assert lay["previous_action"].stop - lay["previous_action"].start == 27


def test_targets_equal_current_gives_zero_difference(env):
    obs = env.reset()
    assert obs.shape == (151,)
    ee = env.ee_poses()
    state = env.state
    tg = Targets(state.body.position, state.body.quaternion, ee[:, :3], ee[:, 3:], np.zeros(4, bool))
    obs = build_observation(state, ee, tg, np.zeros(27))
    lay = observation_layout(4, 6)
    np.testing.assert_array_equal(obs[lay["target_base_position"]], obs[lay["base_position"]])
    np.testing.assert_array_equal(obs[lay["target_base_quaternion"]], obs[lay["base_quaternion"]])
    np.testing.assert_array_equal(obs[lay["target_ee_pose"]], obs[lay["ee_pose"]])


def test_noise_bounds_over_many_samples():
    rng = np.random.default_rng(7)
    noise = ObservationNoise()
    state = SimState(BodyState(rng.normal(size=3), random_quaternion(rng), rng.normal(size=3), rng.normal(size=3)),
                     rng.uniform(-1, 1, 24), rng.uniform(-1, 1, 24), np.zeros(4, bool), np.zeros((4, 3)))
    ee = np.hstack([rng.normal(size=(4, 3)), np.tile([1.0, 0, 0, 0], (4, 1))])
    tg = Targets(np.zeros(3), np.array([1.0, 0, 0, 0]), ee[:, :3], ee[:, 3:], np.zeros(4, bool))
    lay = observation_layout(4, 6)
    clean = build_observation(state, ee, tg, np.zeros(27))
    bounds = {"base_position": 0.025, "base_linear_velocity": 0.05, "base_angular_velocity": 0.05,
              "joint_position": 0.02, "joint_velocity": 0.1}
    n = 100_000
    worst = dict.fromkeys(bounds, 0.0)
    worst_rot = 0.0
    quiet = [k for k in lay if k not in bounds and k != "base_quaternion"]
    qs = lay["base_quaternion"]
    for _ in range(n):
        obs = build_observation(state, ee, tg, np.zeros(27), noise, rng)
        for k in bounds:
            worst[k] = max(worst[k], np.abs(obs[lay[k]] - clean[lay[k]]).max())
        rv = quat_to_rotvec(quat_multiply(quat_conjugate(clean[qs]), obs[qs]))
        worst_rot = max(worst_rot, np.abs(rv).max())
    for k, b in bounds.items():
        assert worst[k] <= b + 1e-12
        assert worst[k] > 0.9 * b  # the range is actually used
    assert 0.018 < worst_rot <= 0.02 + 1e-9
    obs = build_observation(state, ee, tg, np.zeros(27), noise, rng)
    for k in quiet:
        np.testing.assert_array_equal(obs[lay[k]], clean[lay[k]])


# --------------------------------------------------------------------- reward
def test_zero_error_body_reward():
    r = compute_reward(_inputs(), RewardWeights())
    assert r.body == pytest.approx(20.0 * 2.0 * -math.log(1e-5), rel=1e-12)
    assert r.body == pytest.approx(460.517, abs=1e-3)


def test_penalty_example():
    r = compute_reward(_inputs(n_collisions=2, body_collision=1))
    assert r.collision + r.body_collision == -202.0
    assert r.penalty == -202.0


def test_still_robot_has_no_normalization_cost():
    r = compute_reward(_inputs(base_err=0.3, ee_err=0.1))
    assert r.normalization == 0.0


def test_normalization_terms_by_hand():
    qd, tau = np.zeros(24), np.zeros(24)
    qd[:6], tau[:6] = 1.0, 2.0  # arm 0 power 12
    qd[6], tau[6] = 3.0, 1.0  # arm 1 power 3
    r = compute_reward(_inputs(joint_velocity=qd, joint_torque=tau, joint_acceleration=np.full(24, 2.0),
                               base_linear_acceleration=np.array([3.0, 4.0, 0.0]),
                               base_angular_acceleration=np.array([0.0, 0.0, 2.0]),
                               joint_targets=np.full(24, 0.5), thrust=np.array([0.0, 3.0, 4.0])))
    assert r.power == pytest.approx(-2.5e-2 * (144 + 9))
    assert r.joint_acc == pytest.approx(-1e-6 * 96)
    assert r.body_acc == pytest.approx(-1e-2 * 7)
    assert r.action_rate == pytest.approx(-1e-2 * 6)
    assert r.thrust == pytest.approx(-1e-2 * 5)


@settings(max_examples=200, deadline=None)
@given(e1=st.floats(1e-6, 1.0), e2=st.floats(1e-6, 1.0))
def test_task_reward_decreases_with_error(e1, e2):
    if e1 == e2:
        return
    lo, hi = sorted((e1, e2))
    assert compute_reward(_inputs(base_err=lo)).body > compute_reward(_inputs(base_err=hi)).body
    assert compute_reward(_inputs(ee_err=lo)).ee > compute_reward(_inputs(ee_err=hi)).ee


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_breakdown_sums_exactly(seed):
    rng = np.random.default_rng(seed)
    r = compute_reward(_inputs(
        base_err=rng.uniform(0, 1), ee_err=rng.uniform(0, 1),
        base_quaternion=random_quaternion(rng), joint_velocity=rng.normal(size=24), joint_torque=rng.normal(size=24),
        joint_acceleration=rng.normal(size=24) * 100, base_linear_acceleration=rng.normal(size=3),
        joint_targets=rng.normal(size=24), thrust=rng.normal(size=3) * 20,
        n_collisions=int(rng.integers(0, 5)), body_collision=int(rng.integers(0, 2))))
    assert r.total == math.fsum(r.parts)
    assert r.total == r.as_dict()["total"]


def test_orientation_term_uses_quaternion_error():
    q = random_quaternion(np.random.default_rng(3))
    r = compute_reward(_inputs(base_quaternion=q))
    psi = np.linalg.norm(orientation_error(np.array([1.0, 0, 0, 0]), q))
    assert r.body == pytest.approx(20.0 * (-math.log(1e-5) - math.log(psi + 1e-5)))


# -------------------------------------------------------------------- actions
@settings(max_examples=100, deadline=None)
@given(scale=st.floats(1e-3, 1e6), seed=st.integers(0, 1000))
def test_action_clamp(model, scale, seed):
    a = np.random.default_rng(seed).normal(size=27) * scale
    c = clamp_action(a, model)
    lim = model.signed_thrust_limits
    lo, hi = np.tile(model.joint_lower, 4), np.tile(model.joint_upper, 4)
    assert np.all(c[:24] >= lo) and np.all(c[:24] <= hi)
    assert np.all(c[24:] >= -lim[:, 0]) and np.all(c[24:] <= lim[:, 1])


def test_action_dimension_checked(model):
    with pytest.raises(ValueError):
        clamp_action(np.zeros(26), model)
    with pytest.raises(ValueError):
        clamp_action(np.full(27, np.nan), model)


# ------------------------------------------------------------------- episodes
def test_hold_from_rest(env):
    env.reset()
    tr = env.step(_hold(env))
    assert not tr.done
    assert -1e-3 <= tr.reward.normalization <= 0.0
    assert tr.reward.penalty == 0.0


def test_episode_is_750_steps(env):
    env.reset()
    a = _hold(env)
    steps = 0
    while True:
        tr = env.step(a)
        steps += 1
        if tr.done:
            break
    assert steps == 750 == EnvConfig().max_steps
    assert tr.truncated and not tr.terminated
    assert tr.info["time"] == pytest.approx(15.0)
    with pytest.raises(EpisodeDone):
        env.step(a)


def test_step_before_reset_rejected():
    with pytest.raises(EpisodeDone):
        CrawlEnv(QUIET).step(np.zeros(27))


def test_descent_into_surface_terminates(env):
    env.reset()
    a = _hold(env)
    a[26] = -1e3  # clamps to the -z thruster limit
    for _ in range(750):
        tr = env.step(a)
        if tr.done:
            break
    assert tr.terminated
    assert tr.reward.body_collision == -200.0
    assert tr.info["n_collisions"] > 0  # arms hit the surface on the way down
    assert tr.info["time"] < 6.0


def test_end_effector_targets_change_at_5_and_10_s(env):
    env.training = True
    env.reset()
    a = _hold(env)
    changes = []
    prev = env.targets.ee_position.copy()
    for _ in range(520):
        env.step(a)
        if not np.array_equal(env.targets.ee_position, prev):
            changes.append(round(env.state.time, 6))
            prev = env.targets.ee_position.copy()
    assert changes == [5.0, 10.0]


def test_nominal_reset_is_deterministic():
    a, b = CrawlEnv(QUIET, seed=1), CrawlEnv(QUIET, seed=2)
    oa, ob = a.reset(), b.reset()
    lay = observation_layout(4, 6)
    for k in ("base_position", "base_quaternion", "joint_position", "ee_pose"):
        np.testing.assert_array_equal(oa[lay[k]], ob[lay[k]])
    assert a.mass == pytest.approx(250.0)


def test_reset_ranges_over_1000_draws(model):
    rng = np.random.default_rng(11)
    cfg = EnvConfig()
    draws = [sample_reset(rng, cfg, 24) for _ in range(1000)]
    masses = np.array([model.mass * d.mass_scale for d in draws])
    offsets = np.array([d.base_offset for d in draws])
    assert masses.min() >= 225.0 and masses.max() <= 275.0
    assert masses.min() < 230.0 and masses.max() > 270.0
    assert np.abs(offsets).max() <= 0.2
    assert np.abs(np.array([d.joint_offset for d in draws])).max() <= 0.1
    assert np.abs(np.array([d.joint_scale for d in draws])).max() <= 0.25


def test_randomized_resets_respect_ranges():
    env = CrawlEnv(EnvConfig(), seed=5)
    for _ in range(20):
        env.reset()
        assert 225.0 <= env.mass <= 275.0
        assert env.sim.total_mass == pytest.approx(env.mass)
        off = env.state.body.position - env.nominal_base_position()
        assert np.abs(off).max() <= 0.2
        ee0 = env.ee_poses()[:, :3]
        assert np.linalg.norm(env.targets.ee_position - ee0, axis=1).max() <= 0.2 + 1e-12


def test_seeded_episodes_identical():
    runs = []
    for _ in range(2):
        env = CrawlEnv(EnvConfig(), seed=42)
        obs = [env.reset()]
        rng = np.random.default_rng(0)
        rewards = []
        for _ in range(15):
            tr = env.step(np.concatenate([env.state.q + 0.1 * rng.normal(size=24), rng.normal(size=3)]))
            obs.append(tr.observation)
            rewards.append(tr.reward.total)
        runs.append((np.array(obs), rewards))
    np.testing.assert_array_equal(runs[0][0], runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_batch_env_seeded():
    outs = []
    for _ in range(2):
        batch = BatchEnv(2, EnvConfig(), seeds=[3, 4], workers=2)
        obs = batch.reset()
        assert obs.shape == (2, 151)
        acts = np.stack([np.concatenate([e.state.q, np.zeros(3)]) for e in batch.envs])
        o, r, term, trunc, info = batch.step(acts)
        assert o.shape == (2, 151) and r.shape == (2,)
        outs.append((o, r))
    np.testing.assert_array_equal(outs[0][0], outs[1][0])
    np.testing.assert_array_equal(outs[0][1], outs[1][1])
    assert not np.array_equal(outs[0][0][0], outs[0][0][1])


# ----------------------------------------------------------------- curriculum
def test_curriculum_examples():
    assert curriculum_update([0.04], 0.0) == pytest.approx(0.10)
    assert curriculum_update([0.06], 0.0) == 0.0
    r = 0.0
    for _ in range(5):
        r = curriculum_update([0.01, 0.03], r)
    assert r == pytest.approx(0.50)
    with pytest.raises(ValueError):
        curriculum_update([], 0.0)


@settings(max_examples=200, deadline=None)
@given(errs=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20), r0=st.floats(0.0, 5.0))
def test_curriculum_never_shrinks(errs, r0):
    r = curriculum_update(errs, r0)
    assert r >= r0
    assert (r > r0) == (np.mean(errs) < 0.05)


def test_curriculum_window():
    c = Curriculum(CurriculumConfig(window=3))
    assert not c.record(0.01) and not c.record(0.01)
    assert c.record(0.01) and c.range == pytest.approx(0.1)
    for _ in range(3):
        c.record(0.2)
    assert c.range == pytest.approx(0.1) and c.stage == 1


def test_training_episode_feeds_curriculum():
    cfg = EnvConfig(randomization=Randomization(enabled=False), noise=ObservationNoise(enabled=False),
                    episode_length=0.1, curriculum=CurriculumConfig(window=1), hover_height=0.25)
    env = CrawlEnv(cfg, seed=0)
    env.reset()
    tr = None
    while tr is None or not tr.done:
        tr = env.step(_hold(env))
    # base target equals the start at range 0, so the mean error is tiny
    assert tr.info["episode_base_error"] < 0.05
    assert env.curriculum.range == pytest.approx(0.1)


# --------------------------------------------------------------------- config
def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        Randomization(base_position=(0.2, -0.2))
    with pytest.raises(ValueError):
        EnvConfig(control_rate=0.0)
    with pytest.raises(ValueError):
        EnvConfig(sim_rate=130.0)
    cfg = EnvConfig(episode_length=7.5, noise=ObservationNoise(base_position=(-0.01, 0.01)))
    cfg.save(tmp_path / "env.yaml")
    back = EnvConfig.load(tmp_path / "env.yaml")
    assert back == cfg and back.max_steps == 375 and back.substeps == 4
    with pytest.raises(ValueError):
        EnvConfig.from_dict({"episode_lenght": 3})


def test_ppo_artifact():
    ppo = load_ppo_config()
    assert ppo["gamma"] == 0.99 and ppo["gae_lambda"] == 0.95 and ppo["clip_range"] == 0.2
    assert ppo["batch_size"] == ppo["num_envs"] * ppo["steps_per_env"]


# ------------------------------------------------------------------- rollouts
def test_policy_dimension_checked(plans):
    _, sol = plans.get("hover")
    env = CrawlEnv(QUIET)
    with pytest.raises(ValueError):
        tracking_rollout(env, lambda obs: np.zeros(10), sol, duration=0.1)


@pytest.mark.slow
def test_hold_policy_error_grows_with_plan(plans):
    _, sol = plans.get("case1_1")
    env = CrawlEnv(QUIET)
    rep = tracking_rollout(env, hold_policy(env), sol)
    early, late = rep.base_error[: len(rep.t) // 10].mean(), rep.base_error[-len(rep.t) // 10:].mean()
    assert late > 10 * early and rep.max_base_error > 1.0


@pytest.mark.slow
def test_oracle_policy_tracks_plan(plans):
    _, sol = plans.get("case1_1")
    env = CrawlEnv(EnvConfig())
    rep = tracking_rollout(env, tracker_policy(env), sol)
    assert len(rep.t) == 1001
    assert np.isfinite(rep.mean_base_error) and rep.mean_base_error <= 0.15
