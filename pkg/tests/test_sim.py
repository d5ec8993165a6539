import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbcrawl.rigid_body import BodyState, ThrusterCommand
from orbcrawl.rotations import random_quaternion
from orbcrawl.sim import SimState, SimulationError, TrackerConfig, pd_joint_controller, track
from orbcrawl.sim.control import solve_ik

angles = st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6).map(np.array)


def test_zero_configuration_hits_nominal_offsets(sim, model, rng):
    body = BodyState(rng.normal(size=3), random_quaternion(rng))
    for a in range(model.n_arms):
        p, _ = sim.forward_kinematics(np.zeros(6), body, a)
        np.testing.assert_allclose(p, body.position + body.rotation @ model.nominal_offsets[a], atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(q=angles, arm=st.integers(0, 3), dx=st.floats(-5, 5))
def test_rigid_transport(sim, q, arm, dx):
    body = BodyState()
    shifted = BodyState(np.array([dx, 0.0, 0.0]))
    p0, r0 = sim.forward_kinematics(q, body, arm)
    p1, r1 = sim.forward_kinematics(q, shifted, arm)
    np.testing.assert_allclose(p1 - p0, [dx, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(r1, r0, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(q=angles, arm=st.integers(0, 3))
def test_jacobian_path_integral(sim, q, arm):
    # integrate J(s q) q ds from the zero configuration (composite Simpson)
    s = np.linspace(0.0, 1.0, 201)
    vals = np.array([sim.body_jacobian(si * q, arm) @ q for si in s])
    w = np.ones_like(s)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    integral = (s[1] - s[0]) / 3.0 * (w[:, None] * vals).sum(axis=0)
    expected = sim.body_frame_ee(q, arm) - sim.body_frame_ee(np.zeros(6), arm)
    np.testing.assert_allclose(integral, expected, atol=1e-4)


def test_forward_kinematics_matches_simulator_ee(sim, rng):
    q = rng.uniform(-1, 1, 24)
    body = BodyState(rng.normal(size=3), random_quaternion(rng))
    state = sim.initial_state(body, q)
    ee = sim.end_effector_positions(state)
    for a in range(4):
        np.testing.assert_allclose(ee[a], sim.forward_kinematics(q[a * 6:(a + 1) * 6], body, a)[0], atol=1e-12)


def test_mass_matrix_symmetric_positive(sim, rng, model):
    state = sim.initial_state(BodyState(quaternion=random_quaternion(rng)), rng.uniform(-1, 1, 24))
    M = sim.mass_matrix(state)
    np.testing.assert_allclose(M, M.T, atol=1e-10)
    assert np.linalg.eigvalsh(M).min() > 0.0
    np.testing.assert_allclose(M[:3, :3], model.mass * np.eye(3), atol=1e-9)


def test_rest_is_equilibrium(sim):
    s0 = sim.initial_state(BodyState(np.array([0.3, -0.2, 1.0])))
    s = s0
    for _ in range(20):
        s = sim.step(s, np.zeros(24))
    np.testing.assert_allclose(s.vector(), s0.vector(), atol=1e-9)
    assert s.time == pytest.approx(0.1)


def test_thrust_impulse(sim, model):
    s = sim.initial_state()
    thrust = ThrusterCommand(np.array([0.0, 0.0, 0.0, 0.0, 250.0, 0.0]))
    s = sim.pd_step(s, np.zeros(24), thrust, n_sub=200)
    # 250 N for 1 s on 250 kg: the system centre of mass gains exactly 1 m/s
    np.testing.assert_allclose(sim.linear_momentum(s) / model.mass, [0.0, 0.0, 1.0], atol=1e-6)
    # the base body itself rides on compliant arms
    assert s.body.velocity[2] == pytest.approx(1.0, abs=1e-2)
    assert s.thrust_impulse == pytest.approx(250.0)


def _swing_targets(t):
    return 0.6 * np.sin(2.0 * np.pi * 0.4 * t + np.arange(24))


def test_free_floating_com_stationary(sim, rng):
    s = sim.initial_state(BodyState(quaternion=random_quaternion(rng)), rng.uniform(-0.5, 0.5, 24))
    c0 = sim.center_of_mass(s)
    for k in range(100):  # 5 s of arm motion in 50 ms chunks
        s = sim.pd_step(s, _swing_targets(k * 0.05), n_sub=10)
    assert np.abs(s.qd).max() > 0.1
    assert np.abs(s.body.velocity).max() > 1e-3  # the base reacts
    np.testing.assert_allclose(sim.center_of_mass(s), c0, atol=1e-6)


def test_free_floating_momentum_conserved(sim, rng):
    s = sim.initial_state(BodyState(velocity=np.array([0.05, -0.02, 0.01])), rng.uniform(-0.5, 0.5, 24))
    p0 = sim.linear_momentum(s)
    for _ in range(100):  # 10 s: random joint targets plus random feed-forward torques
        s = sim.pd_step(s, rng.uniform(-1, 1, 24), n_sub=20, tau_ff=5.0 * rng.uniform(-1, 1, 24))
    assert np.abs(s.qd).max() > 0.1
    np.testing.assert_allclose(sim.linear_momentum(s), p0, atol=1e-6)


def test_docked_end_effectors_stay_put(sim):
    s = sim.initial_state(contact=np.ones(4, bool))
    anchor = sim.end_effector_positions(s)
    thrust = ThrusterCommand.from_signed([10.0, -5.0, 20.0], sim.model.thruster_limits)
    for k in range(20):  # 1 s
        s = sim.pd_step(s, 0.2 * np.sin(np.arange(24) + k * 0.05), thrust, n_sub=10)
    assert np.abs(s.body.velocity).max() + np.abs(s.qd).max() > 1e-3
    drift = np.linalg.norm(sim.end_effector_positions(s) - anchor, axis=1).max()
    assert drift < 1e-6
    assert s.contact_force.shape == (4, 3) and np.all(np.isfinite(s.contact_force))


def test_dock_attaches_at_current_position(sim, rng):
    s = sim.initial_state(BodyState(), rng.uniform(-0.3, 0.3, 24))
    s = sim.set_contact(s, [True, False, True, False])
    ee = sim.end_effector_positions(s)
    np.testing.assert_array_equal(s.dock_points[[0, 2]], ee[[0, 2]])
    s2 = sim.set_contact(s, [False, False, False, False])
    assert not s2.contact.any()


def test_passive_energy_does_not_grow(sim, rng):
    s = sim.initial_state(BodyState(omega=np.array([0.05, -0.1, 0.08])), rng.uniform(-0.5, 0.5, 24))
    s = SimState(s.body, s.q, rng.uniform(-0.5, 0.5, 24), s.contact, s.dock_points)
    e0 = sim.kinetic_energy(s)
    for _ in range(200):  # 1 s, zero torque
        s = sim.step(s, np.zeros(24))
    assert sim.kinetic_energy(s) - e0 <= 1e-6


def test_bit_identical_runs(sim, rng):
    q0 = rng.uniform(-0.5, 0.5, 24)
    runs = []
    for _ in range(2):
        s = sim.initial_state(BodyState(), q0)
        for k in range(10):
            s = sim.pd_step(s, _swing_targets(0.02 * k), ThrusterCommand.from_signed([5.0, 0.0, -3.0]), n_sub=4)
        runs.append(s.vector())
    np.testing.assert_array_equal(runs[0], runs[1])


def test_non_finite_state_rejected():
    with pytest.raises(SimulationError):
        SimState(BodyState(), np.full(24, np.nan), np.zeros(24), np.zeros(4, bool), np.zeros((4, 3)))


def test_pd_law_examples():
    np.testing.assert_array_equal(pd_joint_controller(np.ones(6), np.ones(6), np.zeros(6), 100.0, 5.0), np.zeros(6))
    assert pd_joint_controller([1.0], [0.0], [0.0], 50.0, 0.0)[0] == pytest.approx(50.0)
    assert pd_joint_controller([10.0], [0.0], [0.0], 100.0, 5.0, limit=150.0)[0] == pytest.approx(150.0)
    assert pd_joint_controller([-10.0], [0.0], [0.0], 100.0, 5.0, limit=150.0)[0] == pytest.approx(-150.0)
    with pytest.raises(ValueError):
        pd_joint_controller([1.0], [0.0], [0.0], -1.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(err=st.floats(-20, 20), qd=st.floats(-10, 10))
def test_pd_torque_within_clamp(err, qd):
    tau = pd_joint_controller([err], [0.0], [qd], 100.0, 5.0, limit=28.0)
    assert abs(tau[0]) <= 28.0


def test_simulator_torques_are_clamped(sim):
    s = sim.pd_step(sim.initial_state(), np.full(24, 3.0))
    assert np.all(np.abs(s.tau) <= sim.tau_limit + 1e-12)
    assert np.abs(s.tau).max() == pytest.approx(150.0)


def test_ik_reaches_reachable_point(sim, rng):
    q_true = rng.uniform(-0.5, 0.5, 6)
    target = sim.body_frame_ee(q_true, 1)
    q, res = solve_ik(lambda q: sim.body_frame_ee(q, 1), lambda q: sim.body_jacobian(q, 1), target, np.zeros(6))
    assert res < 1e-9
    np.testing.assert_allclose(sim.body_frame_ee(q, 1), target, atol=1e-9)


def test_unknown_controller_rejected():
    with pytest.raises(ValueError):
        TrackerConfig(name="mpc")


@pytest.mark.slow
def test_hover_tracking_regulates(plans, sim, tmp_path):
    _, sol = plans.get("hover")
    rep = track(sol, sim, TrackerConfig(name="diffik"))
    assert rep.mean_base_error < 1e-3
    assert np.all(rep.base_error >= 0.0) and np.all(rep.ee_error >= 0.0)
    out = rep.write(tmp_path)
    lines = (out / "tracking.csv").read_text().splitlines()
    assert lines[0].startswith("# orbcrawl tracking v1")
    header = lines[1].split(",")
    assert header[:4] == ["t", "target_x", "target_y", "target_z"]
    assert (out / "tracking_report.json").exists()


@pytest.mark.slow
def test_zero_stiffness_impedance_is_diffik(plans, sim):
    _, sol = plans.get("case1_1")
    a = track(sol, sim, TrackerConfig(name="diffik"), duration=2.0)
    b = track(sol, sim, TrackerConfig(name="impedance", stiffness=0.0), duration=2.0)
    np.testing.assert_array_equal(a.base_error, b.base_error)


@pytest.mark.slow
def test_external_policy_hook(plans, sim):
    _, sol = plans.get("hover")
    calls = []

    def hold(state, targets):
        calls.append(state.time)
        return state.q, np.zeros(3)

    rep = track(sol, sim, TrackerConfig(name="external"), policy=hold, duration=0.5)
    assert len(calls) == 25 and np.isfinite(rep.mean_base_error)
    with pytest.raises(ValueError):
        track(sol, sim, TrackerConfig(name="external"))
