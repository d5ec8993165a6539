import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbcrawl.rigid_body import BodyState, ThrusterCommand, base_dynamics, integrate_state
from orbcrawl.rotations import (
    euler_to_quat,
    euler_to_rotation,
    inertial_to_body,
    quat_derivative,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_to_euler,
    quat_to_rotation,
    random_quaternion,
)


def axis_angle_matrix(axis, angle):
    # Rodrigues, independent of the quaternion code
    k = np.asarray(axis, float) / np.linalg.norm(axis)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def test_identity_quaternion():
    np.testing.assert_array_equal(quat_to_rotation([1.0, 0, 0, 0]), np.eye(3))


def test_quarter_turn_about_z():
    q = np.array([np.cos(np.pi / 4), 0, 0, np.sin(np.pi / 4)])
    R = quat_to_rotation(q)
    np.testing.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(R, axis_angle_matrix([0, 0, 1], np.pi / 2), atol=1e-15)
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)


def test_printed_form_is_transpose():
    q = random_quaternion(np.random.default_rng(0))
    np.testing.assert_allclose(inertial_to_body(q), quat_to_rotation(q).T, atol=1e-15)


def test_non_unit_quaternion_rejected():
    with pytest.raises(ValueError):
        quat_to_rotation([1.0, 0.01, 0.0, 0.0])


def test_so3_for_random_quaternions():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        R = quat_to_rotation(random_quaternion(rng))
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(R) - 1.0) < 1e-9


@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_derivative_orthogonal_to_q(v, w):
    q = quat_normalize(v)
    assert abs(q @ quat_derivative(q, w)) < 1e-12


def test_zero_rate_derivative():
    q = random_quaternion(np.random.default_rng(3))
    np.testing.assert_array_equal(quat_derivative(q, np.zeros(3)), np.zeros(4))


def test_composition_matches_matrices(rng):
    a, b = random_quaternion(rng), random_quaternion(rng)
    np.testing.assert_allclose(quat_to_rotation(quat_multiply(a, b)), quat_to_rotation(a) @ quat_to_rotation(b), atol=1e-12)


def test_euler_roundtrip(rng):
    for _ in range(50):
        rpy = rng.uniform([-3, -1.4, -3], [3, 1.4, 3])
        q = euler_to_quat(rpy)
        np.testing.assert_allclose(quat_to_rotation(q), euler_to_rotation(rpy), atol=1e-12)
        np.testing.assert_allclose(quat_to_euler(q), rpy, atol=1e-10)


def free_accel(model, **kw):
    def f(s):
        return base_dynamics(s, [], [], None, model, **kw)
    return f


def test_spin_integration_matches_exponential(model):
    s = BodyState(omega=np.array([0.0, 0.0, 2.0]))
    dt = np.pi / 4 / 200
    for _ in range(200):
        s = integrate_state(s, (np.zeros(3), np.zeros(3)), dt)
    expected = quat_from_axis_angle([0, 0, 1], np.pi / 2)
    np.testing.assert_allclose(s.quaternion, expected, atol=1e-6)


def test_free_float_zero_acceleration(model):
    lin, ang = base_dynamics(BodyState(), [np.zeros(3)] * 4, [np.zeros(3)] * 4, ThrusterCommand(), model)
    np.testing.assert_array_equal(lin, 0)
    np.testing.assert_array_equal(ang, 0)


def test_single_thruster_f_equals_ma(model):
    thrust = ThrusterCommand.from_signed([0, 0, 250.0])
    lin, _ = base_dynamics(BodyState(), [], [], thrust, model)
    np.testing.assert_allclose(lin, [0, 0, 1.0], atol=1e-12)


def test_gyroscopic_term(model):
    inertia = np.diag([10.0, 20.0, 30.0])
    _, ang = base_dynamics(BodyState(omega=np.array([0, 0, 1.0])), [], [], None, model, inertia=inertia)
    np.testing.assert_allclose(ang, 0, atol=1e-15)
    w = np.array([1.0, 0.0, 1.0])
    _, ang = base_dynamics(BodyState(omega=w), [], [], None, model, inertia=inertia)
    # w x Iw = (1,0,1) x (10,0,30) = (0*30 - 1*0, 1*10 - 1*30, 0) = (0, -20, 0)
    np.testing.assert_allclose(ang, -np.linalg.solve(inertia, [0.0, -20.0, 0.0]), atol=1e-15)


def test_contact_moment_arm(model):
    state = BodyState(position=np.array([0.0, 0.0, 1.0]))
    forces = [np.zeros(3)] * 4
    points = [np.zeros(3)] * 4
    forces[0] = np.array([0.0, 0.0, 10.0])
    points[0] = np.array([1.0, 0.0, 1.0])
    lin, ang = base_dynamics(state, forces, points, None, model, inertia=np.eye(3))
    np.testing.assert_allclose(lin, [0, 0, 10 / 250])
    np.testing.assert_allclose(ang, np.cross([1, 0, 0], [0, 0, 10]))


def test_singular_inertia_rejected(model):
    with pytest.raises(ValueError):
        base_dynamics(BodyState(), [], [], None, model, inertia=np.diag([1.0, 1.0, 0.0]))


def test_linear_in_forces(model, rng):
    state = BodyState(position=rng.normal(size=3), quaternion=random_quaternion(rng))
    forces = rng.normal(size=(4, 3))
    points = rng.normal(size=(4, 3))
    for alpha in rng.uniform(-5, 5, size=10):
        a1, _ = base_dynamics(state, forces, points, None, model)
        a2, _ = base_dynamics(state, alpha * forces, points, None, model)
        np.testing.assert_allclose(a2, alpha * a1, atol=1e-14)


def test_uniform_motion():
    s = integrate_state(BodyState(velocity=np.array([1.0, 0, 0])), (np.zeros(3), np.zeros(3)), 0.5)
    np.testing.assert_allclose(s.position, [0.5, 0, 0], atol=1e-15)


def test_constant_thrust_two_seconds(model):
    thrust = ThrusterCommand.from_signed([0, 0, 250.0])
    s = BodyState()
    for _ in range(400):
        s = integrate_state(s, lambda st: base_dynamics(st, [], [], thrust, model), 0.005)
    assert abs(s.position[2] - 2.0) < 1e-6


def test_principal_spin_conserved(model):
    inertia = np.diag([10.0, 20.0, 30.0])
    s = BodyState(omega=np.array([0.0, 0.0, 1.5]))
    for _ in range(2000):
        s = integrate_state(s, free_accel(model, inertia=inertia), 0.005)
    np.testing.assert_allclose(s.omega, [0, 0, 1.5], atol=1e-9)


def test_invariants_torque_free(model):
    inertia = np.diag([10.0, 20.0, 30.0])
    s = BodyState(velocity=np.array([0.1, -0.2, 0.05]), omega=np.array([0.3, 0.1, -0.2]))
    p0 = model.mass * s.velocity
    L0 = s.rotation @ inertia @ s.omega
    for _ in range(2000):
        s = integrate_state(s, free_accel(model, inertia=inertia), 0.005)
        assert abs(np.linalg.norm(s.quaternion) - 1.0) < 1e-12
    np.testing.assert_allclose(model.mass * s.velocity, p0, atol=1e-9)
    np.testing.assert_allclose(s.rotation @ inertia @ s.omega, L0, atol=1e-6)


def test_thruster_split_nonnegative(rng):
    for u in rng.normal(scale=30, size=(100, 3)):
        cmd = ThrusterCommand.from_signed(u)
        assert np.all(cmd.magnitudes >= 0)
        np.testing.assert_allclose(cmd.signed, u, atol=1e-12)


def test_thruster_rejects_pull():
    with pytest.raises(ValueError):
        ThrusterCommand(np.array([1, -1, 0, 0, 0, 0.0]))


def test_model_invariants(model):
    assert model.mass == pytest.approx(250.0)
    assert np.all(np.linalg.eigvalsh(model.centroidal_inertia) > 0)
    assert model.n_arms == 4 and model.n_joints == 6
