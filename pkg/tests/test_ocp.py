from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcrawl.ocp import (
    CostWeights,
    Transcription,
    build_problem,
    closure_error,
    constraints,
    cost,
    max_swing_displacement,
)
from orbcrawl.rigid_body import ThrusterCommand
from orbcrawl.scenario import ConfigError, Pose, load_scenario
from orbcrawl.schedule import CONTACT
from orbcrawl.spline import sample_times

ZERO = CostWeights(force=(0.0, 0.0, 0.0), velocity=(0.0, 0.0, 0.0), thrust=0.0, swing_velocity=0.0)


def _hover(**kw):
    return Transcription(build_problem(load_scenario("hover"), **kw))


def _set(tr, x, block, value):
    x = x.copy()
    x[tr.layout.slice(block)] = np.broadcast_to(value, tr.layout.index(block).shape).ravel()
    return x


# ---------------------------------------------------------------- problem


@pytest.mark.parametrize("name, dx, dy, T, z0", [
    ("case1_1", 1.2, 0.0, 20.0, None),
    ("case1_2", 1.5, -0.5, 25.0, None),
    ("case2", 1.2, 0.0, 20.0, 0.5),
])
def test_bundled_problems(name, dx, dy, T, z0):
    prob = build_problem(load_scenario(name))
    np.testing.assert_allclose(prob.goal_position[:2] - prob.start_position[:2], [dx, dy], atol=1e-12)
    assert prob.duration == T
    if z0 is None:
        assert prob.starts_in_contact
    else:
        assert not prob.starts_in_contact
        assert prob.start_position[2] - prob.goal_position[2] == pytest.approx(z0)


def test_bad_problems_rejected():
    cfg = load_scenario("case1_1")
    with pytest.raises(ConfigError):
        build_problem(cfg, n_contacts=0)
    with pytest.raises(ConfigError):
        build_problem(cfg.with_(goal=Pose(xy=(500.0, 0.0))))
    with pytest.raises(ConfigError):
        build_problem(cfg, duration=-1.0)
    with pytest.raises(ValueError):
        CostWeights(force=(1.0, -1.0, 1.0))


def test_layout_is_a_bijection():
    tr = Transcription(build_problem(load_scenario("case2")))
    seen = np.concatenate([tr.layout.index(k).ravel() for k in tr.layout.names()])
    np.testing.assert_array_equal(np.sort(seen), np.arange(tr.n))
    x = np.random.default_rng(0).normal(size=tr.n)
    np.testing.assert_array_equal(tr.layout.pack(tr.layout.unpack(x)), x)


# ---------------------------------------------------------------- cost


def test_cost_zero_for_static_hover():
    tr = _hover()
    assert cost(tr.initial_guess(), tr) == 0.0


def test_cost_constant_force():
    tr = _hover(duration=2.0, weights=replace(ZERO, force=(1.0, 0.0, 0.0)))
    x = tr.initial_guess()
    f = np.array([1.0, 0.0, 0.0])
    x = _set(tr, x, "force_val0", f)
    x = _set(tr, x, "force_start0", np.stack([f, np.zeros(3)]))
    x = _set(tr, x, "force_end0", np.stack([f, np.zeros(3)]))
    assert cost(x, tr) == pytest.approx(2.0, abs=1e-12)


def test_cost_constant_base_velocity():
    tr = _hover(duration=4.0, weights=replace(ZERO, velocity=(1.0, 0.0, 0.0)))
    x = tr.initial_guess()
    pos = tr.layout.unpack(x)["base_pos"].copy()
    pos[:, 0] = 0.5 * tr.knot_times
    x = _set(tr, x, "base_pos", pos)
    x = _set(tr, x, "base_vel", [0.5, 0.0, 0.0])
    assert cost(x, tr) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------- constraints


def test_static_hover_is_feasible():
    tr = _hover()
    eq, ineq = constraints(tr.initial_guess(), tr)
    assert set(eq) == {"boundary", "partition", "dynamics_linear", "dynamics_angular", "docking"}
    for v in eq.values():
        assert np.abs(v).max(initial=0.0) < 1e-12
    for v in ineq.values():
        assert v.size == 0 or v.min() > 0.0


def test_partition_example():
    prob = build_problem(load_scenario("case2"), n_contacts=2)
    tr = Transcription(prob)
    x = tr.initial_guess()
    for a in range(tr.n_arms):
        assert len(tr.kinds[a]) == 4
        x = _set(tr, x, f"dur{a}", [4.0, 6.0, 4.0, 6.0])
    x = _set(tr, x, "thrust_dur", [4.0, 6.0, 4.0, 6.0])
    eq, _ = constraints(x, tr)
    assert np.all(eq["partition"] == 0.0)
    x = _set(tr, x, "dur1", [4.0, 6.0, 4.0, 7.0])
    assert constraints(x, tr)[0]["partition"][1] == pytest.approx(1.0)


def test_single_knot_clearance_violation(plans):
    prob, sol = plans.get("case1_1")
    tr = Transcription(prob)
    _, ineq0 = constraints(sol.x, tr)
    assert min(v.min() for v in ineq0.values() if v.size) > -1e-8
    sw = tr.layout.unpack(sol.x)["swing_pos0"].copy()
    sw[0, 0, 2] = prob.hmap.height_at(*sw[0, 0, :2]) - 0.01
    _, ineq = constraints(_set(tr, sol.x, "swing_pos0", sw), tr)
    bad = np.flatnonzero(ineq["clearance"] < 0.0)
    assert bad.size >= 1
    assert {tr.clear_nodes[i][0] for i in bad} == {0}
    for k, v in ineq.items():
        if k != "clearance" and v.size:
            assert v.min() > -1e-8, k


def _random_point(tr, rng):
    x0 = tr.initial_guess()
    x = x0 + 0.02 * rng.normal(size=tr.n) * tr.layout.scales()
    for a in range(tr.n_arms):
        s = tr.layout.slice(f"dur{a}")
        x[s] = x0[s] * rng.uniform(0.8, 1.2, size=x0[s].shape)
    if "thrust_dur" in tr.layout:
        s = tr.layout.slice("thrust_dur")
        x[s] = x0[s] * rng.uniform(0.8, 1.2, size=x0[s].shape)
    return x


def _slices(tr, x):
    c, eq, ineq = tr.evaluate(x)
    out = {"cost": np.atleast_1d(c)}
    out.update({f"eq_{k}": eq[s] for k, s in tr.eq_slices.items()})
    out.update({f"in_{k}": ineq[s] for k, s in tr.ineq_slices.items()})
    return out


def _analytic(tr, x):
    g, J_eq, J_in = tr.derivatives(x)
    out = {"cost": g[None, :]}
    out.update({f"eq_{k}": J_eq[s].toarray() for k, s in tr.eq_slices.items()})
    out.update({f"in_{k}": J_in[s].toarray() for k, s in tr.ineq_slices.items()})
    return out


def _assert_close(fd, an, where):
    for k in an:
        if an[k].size == 0:
            continue
        scale = max(np.abs(an[k]).max(), np.abs(fd[k]).max(), 1e-8)
        assert np.abs(fd[k] - an[k]).max() <= 1e-4 * scale, f"{where}: {k}"


def test_gradients_full_central_differences():
    tr = _hover(duration=1.0, n_contacts=2, n_thrust_segments=1, polys_per_segment=2)
    rng = np.random.default_rng(7)
    h = 1e-6
    for trial in range(20):
        x = _random_point(tr, rng)
        an = _analytic(tr, x)
        fd = {k: np.zeros_like(v) for k, v in an.items()}
        for i in range(tr.n):
            e = np.zeros(tr.n)
            e[i] = h
            up, dn = _slices(tr, x + e), _slices(tr, x - e)
            for k in fd:
                fd[k][:, i] = (up[k] - dn[k]) / (2 * h)
        _assert_close(fd, an, f"point {trial}")


def test_gradients_directional_on_crawl():
    tr = Transcription(build_problem(load_scenario("ablation_5s")))
    rng = np.random.default_rng(11)
    h = 1e-6
    for trial in range(20):
        x = _random_point(tr, rng)
        an = _analytic(tr, x)
        for _ in range(3):
            d = rng.normal(size=tr.n)
            up, dn = _slices(tr, x + h * d), _slices(tr, x - h * d)
            fd = {k: ((up[k] - dn[k]) / (2 * h))[:, None] for k in an}
            _assert_close(fd, {k: (v @ d)[:, None] for k, v in an.items()}, f"point {trial}")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_piece_tables_tile_the_horizon(seed):
    tr = _hover(duration=2.0, n_contacts=3)
    x = _random_point(tr, np.random.default_rng(seed))
    for a in range(tr.n_arms):
        pos, frc = tr.arm_pieces(x, a)
        for p in (pos, frc):
            np.testing.assert_allclose(p.start[1:], p.start[:-1] + p.dur[:-1], atol=1e-12)
            assert p.start[0] == 0.0
            assert p.start[-1] + p.dur[-1] == pytest.approx(tr.phase_durations(x)[a].sum(), abs=1e-12)


# ---------------------------------------------------------------- solves


@pytest.mark.slow
def test_case1_1_reaches_goal(plans):
    prob, sol = plans.get("case1_1")
    assert sol.converged
    assert sol.residuals["max_eq"] < 1e-4
    assert sol.residuals["max_ineq_violation"] < 1e-6
    assert sol.residuals["stationarity"] < 1e-3
    assert abs(sol.base_position(prob.duration)[0] - 1.2) < 1e-3


@pytest.mark.slow
def test_thrusters_reduce_contact_forces(plans):
    _, with_thr = plans.get("case1_1")
    _, without = plans.get("case1_1", thrusters=False)
    assert without.converged
    assert with_thr.peak_force().max() < without.peak_force().max()
    assert np.all(without.thrust(sample_times(without.duration, 10.0)) == 0.0)


@pytest.mark.slow
def test_degenerate_goal_is_stationary(plans):
    _, sol = plans.get("hover", duration=20.0)
    assert sol.converged
    assert sol.cost < 1e-8
    t = sample_times(sol.duration, 10.0)
    assert np.abs(sol.thrust(t)).max() < 1e-6


@pytest.mark.slow
def test_contact_consistency(plans):
    prob, sol = plans.get("case1_1")
    tr = Transcription(prob)
    for a in range(tr.n_arms):
        arm = sol.schedule.arms[a]
        b = arm.boundaries
        for j, kind in enumerate(arm.kinds):
            nodes = b[j] + (b[j + 1] - b[j]) * np.linspace(0.02, 0.98, 9)
            if kind == CONTACT:
                assert np.linalg.norm(sol.ee_position[a](nodes, 1), axis=-1).max() < 1e-6
                p = sol.ee_position[a](nodes)
                assert np.abs(p[:, 2] - prob.hmap.height_at(p[:, 0], p[:, 1])).max() < 1e-6
            else:
                assert np.linalg.norm(sol.force[a](nodes), axis=-1).max() < 1e-8


@pytest.mark.slow
def test_thruster_sign_split(plans):
    _, sol = plans.get("case1_1")
    t = sample_times(sol.duration, 20.0)
    ch = sol.thruster_channels(t)
    assert ch.shape == (len(t), 6) and np.all(ch >= 0.0)
    np.testing.assert_array_equal(np.array([ThrusterCommand(c).signed for c in ch]), sol.thrust(t))
    assert np.abs(sol.thrust(t)).max() > 0.0


@pytest.mark.slow
def test_solution_splines_are_c1_and_partitioned(plans):
    prob, sol = plans.get("case1_1")
    splines = [sol.base_position, sol.base_rpy, sol.thrust, *sol.ee_position, *sol.force]
    for vs in splines:
        for ch in vs.channels:
            assert ch.duration == pytest.approx(prob.duration, abs=1e-9)
            for s0, s1 in zip(ch.segments[:-1], ch.segments[1:]):
                assert abs(s0(s0.duration) - s1(0.0)) < 1e-10 * max(1.0, abs(s1(0.0)))
                assert abs(s0(s0.duration, 1) - s1(0.0, 1)) < 1e-10 * max(1.0, abs(s1(0.0, 1)))
    for arm in sol.schedule.arms:
        assert sum(arm.durations) == pytest.approx(prob.duration, abs=1e-12)


@pytest.mark.slow
def test_dynamics_closure(plans, model):
    _, sol = plans.get("case1_1")
    assert closure_error(sol, model, rate=100.0) < 1e-2


@pytest.mark.slow
def test_fewer_contacts_mean_longer_swings(plans):
    _, four = plans.get("ablation_5s")
    _, six = plans.get("ablation_5s", n_contacts=6)
    assert four.converged and six.converged
    assert max_swing_displacement(four) > max_swing_displacement(six)
