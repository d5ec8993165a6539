"""Floating-base multibody dynamics of the full robot.

Generalised coordinates: base position, base quaternion (scalar first) and
the stacked joint angles. Velocities: inertial base velocity, body-frame
angular rate and joint rates, so ``nv = 6 + arms * joints``.

Equations of motion come from projecting the Newton-Euler equations of
every rigid body (base, fixed arm mounts, links) through its velocity
Jacobian (Kane's method with the body rate as quasi-velocity):

    M(q) v_dot + h(q, v) = Q + Jc' f
    Jc v_dot = -Jc_dot v - 2 w_s Jc v - w_s^2 (p_ee - p_dock)

Docked end-effectors contribute the bilateral rows ``Jc``; the right-hand
side adds Baumgarte stabilisation against drift.
"""

from __future__ import annotations

import jax
import jax.numpy as jnp
import numpy as np

from .. import _jax  # noqa: F401
from ..robot import RobotModel

STAB_OMEGA = 50.0  # [rad/s] Baumgarte natural frequency of the docking rows


def _skew(v):
    return jnp.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _axis_rotation(axis, angle):
    k = _skew(axis)
    return jnp.eye(3) + jnp.sin(angle) * k + (1.0 - jnp.cos(angle)) * (k @ k)


def quat_rotation(q):
    """Body-to-inertial matrix; polynomial in ``q`` so it differentiates off the unit sphere."""
    w, v = q[0], q[1:]
    return (w * w - v @ v) * jnp.eye(3) + 2.0 * jnp.outer(v, v) + 2.0 * w * _skew(v)


def quat_rate(q, omega):
    wx, wy, wz = omega
    om = jnp.array([[0.0, -wx, -wy, -wz], [wx, 0.0, wz, -wy], [wy, -wz, 0.0, wx], [wz, wy, -wx, 0.0]])
    return 0.5 * om @ q


def model_params(model: RobotModel) -> dict:
    """Numeric parameters of ``model`` as a pytree of arrays (a jit argument)."""
    ch = model.chain
    rot = np.array([model.mount_rotation(a) for a in range(model.n_arms)])
    return {
        "body_mass": np.float64(model.body_mass),
        "body_inertia": np.asarray(model.body_inertia, float),
        "mount_pos": np.asarray(model.mount_positions, float),
        "mount_rot": rot,
        "mount_tip": np.asarray(ch.mount.tip, float),
        "mount_mass": np.float64(ch.mount.mass),
        "mount_inertia": np.diag(ch.mount.inertia).astype(float),
        "link_tip": np.array([l.tip for l in ch.links], float),
        "link_mass": np.array([l.mass for l in ch.links], float),
        "link_inertia": np.array([np.diag(l.inertia) for l in ch.links], float),
        "axes": np.array(ch.axes, float),
        "offsets": np.array(ch.zero_offsets, float),
    }


def arm_frames(p, q):
    """Link rotations, joint origins and end-effector points, body frame; ``q`` is (arms, n)."""
    n = p["link_tip"].shape[0]

    def one(mpos, mrot, qa):
        rot = mrot
        pos = mpos + mrot @ p["mount_tip"]
        rots, origins = [], []
        for k in range(n):
            rot = rot @ _axis_rotation(p["axes"][k], qa[k] + p["offsets"][k])
            rots.append(rot)
            origins.append(pos)
            pos = pos + rot @ p["link_tip"][k]
        return jnp.stack(rots), jnp.stack(origins), pos

    return jax.vmap(one)(p["mount_pos"], p["mount_rot"], q)


def _split(p, qpos):
    arms, n = p["mount_pos"].shape[0], p["link_tip"].shape[0]
    return qpos[:3], qpos[3:7], qpos[7:].reshape(arms, n)


def _coms(p, q):
    rots, origins, _ = arm_frames(p, q)
    return origins + 0.5 * jnp.einsum("akij,kj->aki", rots, p["link_tip"])


def body_velocities(p, qpos, v):
    """CoM velocity and angular velocity (both inertial) of every body, shape (bodies, 3) each.

    Body order: base, the arm mounts, then the links arm-major.
    """
    arms, n = p["mount_pos"].shape[0], p["link_tip"].shape[0]
    _, quat, q = _split(p, qpos)
    xd, w, qd = v[:3], v[3:6], v[6:].reshape(arms, n)
    rot = quat_rotation(quat)
    c, cdot = jax.jvp(lambda qq: _coms(p, qq), (q,), (qd,))
    rots = arm_frames(p, q)[0]
    axes = jnp.einsum("akij,kj->aki", rots, p["axes"])
    wrel = jnp.cumsum(axes * qd[..., None], axis=1)
    mount_c = p["mount_pos"] + 0.5 * jnp.einsum("aij,j->ai", p["mount_rot"], p["mount_tip"])

    lin_links = xd + (jnp.cross(w, c) + cdot).reshape(-1, 3) @ rot.T
    ang_links = (w + wrel).reshape(-1, 3) @ rot.T
    lin_mount = xd + jnp.cross(w, mount_c) @ rot.T
    ang_mount = jnp.broadcast_to(rot @ w, (arms, 3))
    lin = jnp.concatenate([xd[None], lin_mount, lin_links])
    ang = jnp.concatenate([(rot @ w)[None], ang_mount, ang_links])
    return lin, ang


def body_masses_inertias(p, qpos):
    """Masses and inertial-frame inertia tensors of every body."""
    arms = p["mount_pos"].shape[0]
    _, quat, q = _split(p, qpos)
    rot = quat_rotation(quat)
    rots = arm_frames(p, q)[0].reshape(-1, 3, 3)
    r_links = jnp.einsum("ij,bjk->bik", rot, rots)
    i_links = jnp.einsum("bij,bjk,blk->bil", r_links, jnp.tile(p["link_inertia"], (arms, 1, 1)), r_links)
    r_mount = jnp.einsum("ij,ajk->aik", rot, p["mount_rot"])
    i_mount = jnp.einsum("aij,jk,alk->ail", r_mount, p["mount_inertia"], r_mount)
    i_base = rot @ p["body_inertia"] @ rot.T
    inertia = jnp.concatenate([i_base[None], i_mount, i_links])
    mass = jnp.concatenate([p["body_mass"][None], jnp.full(arms, p["mount_mass"]), jnp.tile(p["link_mass"], arms)])
    return mass, inertia


def qpos_rate(qpos, v):
    return jnp.concatenate([v[:3], quat_rate(qpos[3:7], v[3:6]), v[6:]])


def ee_positions(p, qpos):
    """End-effector positions, inertial, (arms, 3)."""
    x, quat, q = _split(p, qpos)
    return x + arm_frames(p, q)[2] @ quat_rotation(quat).T


def _ee_velocity(p, qpos, v):
    return jax.jvp(lambda qp: ee_positions(p, qp), (qpos,), (qpos_rate(qpos, v),))[1]


def velocity_jacobians(p, qpos, nv):
    return jax.jacfwd(lambda vv: body_velocities(p, qpos, vv))(jnp.zeros(nv))


def mass_matrix_and_bias(p, qpos, v, jac=None):
    jl, ja = velocity_jacobians(p, qpos, v.shape[0]) if jac is None else jac
    lin, ang = body_velocities(p, qpos, v)
    dlin, dang = jax.jvp(lambda qp: body_velocities(p, qp, v), (qpos,), (qpos_rate(qpos, v),))[1]
    mass, inertia = body_masses_inertias(p, qpos)
    big_m = jnp.einsum("b,bin,bim->nm", mass, jl, jl) + jnp.einsum("bin,bij,bjm->nm", ja, inertia, ja)
    iw = jnp.einsum("bij,bj->bi", inertia, ang)
    gyro = jnp.einsum("bij,bj->bi", inertia, dang) + jnp.cross(ang, iw)
    bias = jnp.einsum("b,bin,bi->n", mass, jl, dlin) + jnp.einsum("bin,bi->n", ja, gyro)
    return big_m, bias, jl


def accelerations(p, qpos, v, tau, thrust, dock_mask, dock_points, jac=None):
    """``(v_dot, f_dock)``; ``thrust`` is a body-frame force on the base.

    ``f_dock`` (arms, 3) are the inertial forces the anchors exert on the
    docked end-effectors (zero for free arms).
    """
    nv = v.shape[0]
    big_m, bias, jl = mass_matrix_and_bias(p, qpos, v, jac)
    rot = quat_rotation(qpos[3:7])
    gen = jl[0].T @ (rot @ thrust) + jnp.concatenate([jnp.zeros(6), tau])
    jc = jax.jacfwd(lambda vv: _ee_velocity(p, qpos, vv))(jnp.zeros(nv)).reshape(-1, nv)
    jdv = jax.jvp(lambda qp: _ee_velocity(p, qp, v), (qpos,), (qpos_rate(qpos, v),))[1].reshape(-1)
    err = (ee_positions(p, qpos) - dock_points).reshape(-1)
    mask = jnp.repeat(dock_mask.astype(v.dtype), 3)
    rhs_c = -(jdv + 2.0 * STAB_OMEGA * (jc @ v) + STAB_OMEGA**2 * err)
    jcm = mask[:, None] * jc
    m = jcm.shape[0]
    kkt = jnp.block([[big_m, jcm.T], [jcm, -jnp.diag(1.0 - mask)]])
    sol = jnp.linalg.solve(kkt, jnp.concatenate([gen - bias, mask * rhs_c]))
    # M v_dot = Q - h - Jc' sol: the force the anchor exerts on the robot is -sol
    return sol[:nv], -(mask * sol[nv:nv + m]).reshape(-1, 3)


# The integrated state carries the total linear momentum P in place of the
# base velocity: dP/dt is the external force exactly, so free-floating
# momentum is conserved to round-off instead of to the RK4 truncation error.
# P = m_tot * xd + A_rest @ v[3:], since every body's CoM velocity contains xd.


def _to_momentum(p, y, nq):
    qpos, v = y[:nq], y[nq:]
    jl, _ = velocity_jacobians(p, qpos, v.shape[0])
    mass, _ = body_masses_inertias(p, qpos)
    return y.at[nq:nq + 3].set(jnp.einsum("b,bin,n->i", mass, jl, v))


def _from_momentum(p, z, nq):
    qpos = z[:nq]
    nv = z.shape[0] - nq
    jl, _ = velocity_jacobians(p, qpos, nv)
    mass, _ = body_masses_inertias(p, qpos)
    a_rest = jnp.einsum("b,bin->in", mass, jl[:, :, 3:])
    xd = (z[nq:nq + 3] - a_rest @ z[nq + 3:]) / mass.sum()
    return z.at[nq:nq + 3].set(xd)


def _deriv(p, z, tau, thrust, dock_mask, dock_points, nq):
    qpos = z[:nq]
    qpos = qpos.at[3:7].set(qpos[3:7] / jnp.linalg.norm(qpos[3:7]))
    nv = z.shape[0] - nq
    jac = velocity_jacobians(p, qpos, nv)
    mass, _ = body_masses_inertias(p, qpos)
    a_rest = jnp.einsum("b,bin->in", mass, jac[0][:, :, 3:])
    xd = (z[nq:nq + 3] - a_rest @ z[nq + 3:]) / mass.sum()
    v = jnp.concatenate([xd, z[nq + 3:]])
    vdot, lam = accelerations(p, qpos, v, tau, thrust, dock_mask, dock_points, jac)
    pdot = quat_rotation(qpos[3:7]) @ thrust + lam.sum(axis=0)
    return jnp.concatenate([qpos_rate(qpos, v), pdot, vdot[3:]]), lam


_RK4_C = (0.0, 0.5, 0.5, 1.0)
_RK4_B = (1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0)


@jax.jit
def advance(p, y, q_target, tau_ff, kp, kd, tau_limit, thrust, dock_mask, dock_points, dt, n_sub):
    """``n_sub`` RK4 steps with a zero-order-hold PD law re-evaluated at each one.

    Pass ``kp = kd = 0`` for pure torque input through ``tau_ff``. Returns the
    new state vector, the last step's torques and docking forces.
    """
    nq = 7 + q_target.shape[0]
    c, b = jnp.array(_RK4_C), jnp.array(_RK4_B)

    def one_step(_, carry):
        y, _, _ = carry
        q, qd = y[7:nq], y[nq + 6:]
        tau = jnp.clip(kp * (q_target - q) - kd * qd + tau_ff, -tau_limit, tau_limit)

        def stage(i, st):
            k, acc, lam = st
            ki, li = _deriv(p, y + c[i] * dt * k, tau, thrust, dock_mask, dock_points, nq)
            lam = jnp.where(i == 0, li, lam)
            return ki, acc + b[i] * ki, lam

        zero = jnp.zeros_like(y)
        _, acc, lam = jax.lax.fori_loop(0, 4, stage, (zero, zero, jnp.zeros_like(dock_points)))
        y = y + dt * acc
        quat = y[3:7] / jnp.linalg.norm(y[3:7])
        y = y.at[3:7].set(jnp.where(quat[0] < 0.0, -quat, quat))
        return y, tau, lam

    init = (_to_momentum(p, y, nq), jnp.zeros_like(q_target), jnp.zeros_like(dock_points))
    z, tau, lam = jax.lax.fori_loop(0, n_sub, one_step, init)
    return _from_momentum(p, z, nq), tau, lam


@jax.jit
def _mass_matrix(p, qpos):
    return mass_matrix_and_bias(p, qpos, jnp.zeros(6 + qpos.shape[0] - 7))[0]


@jax.jit
def _momentum(p, qpos, v):
    lin, _ = body_velocities(p, qpos, v)
    mass, _ = body_masses_inertias(p, qpos)
    return jnp.einsum("b,bi->i", mass, lin)


@jax.jit
def _energy(p, qpos, v):
    lin, ang = body_velocities(p, qpos, v)
    mass, inertia = body_masses_inertias(p, qpos)
    return 0.5 * jnp.sum(mass * jnp.sum(lin * lin, axis=1)) + 0.5 * jnp.einsum("bi,bij,bj->", ang, inertia, ang)


@jax.jit
def _com(p, qpos):
    x, quat, q = _split(p, qpos)
    rot = quat_rotation(quat)
    mount_c = p["mount_pos"] + 0.5 * jnp.einsum("aij,j->ai", p["mount_rot"], p["mount_tip"])
    pts = jnp.concatenate([jnp.zeros((1, 3)), mount_c, _coms(p, q).reshape(-1, 3)])
    mass, _ = body_masses_inertias(p, qpos)
    return x + rot @ (mass @ pts) / mass.sum()


@jax.jit
def _ee_positions(p, qpos):
    return ee_positions(p, qpos)
