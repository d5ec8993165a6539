"""Direct transcription of the crawling-maneuver OCP into an NLP.

All channels are cubic Hermite splines parametrised by knot values and
slopes. The base (position and ZYX Euler angles) uses uniform knots; every
arm has an alternating list of contact/swing phases whose durations are
decision variables. Piece start times are cumulative sums of durations, so
nodes placed at fixed fractions of a piece move with the durations.

Layout of the decision vector (one block per entry, row-major):

    base_pos, base_vel      (Nk, 3)   base knot positions / slopes
    base_rpy, base_rate     (Nk, 3)   Euler-angle knots / slopes
    dur{a}                  (P_a,)    phase durations of arm a
    contact{a}              (C_a, 3)  free contact positions (the first one is
                                      fixed when the arm starts docked)
    swing_pos{a}, swing_vel{a}    (S_a, K-1, 3) interior swing knots
    force_val{a}, force_slope{a}  (C_a, K-1, 3) interior force knots per contact phase
    force_start{a}          (2, 3)    value/slope at t=0 (only if docked at start)
    force_end{a}            (2, 3)    value/slope at t=T
    thrust_dur              (N_b,)    thruster segment durations
    thrust_val, thrust_slope (N_b*K+1, 3)

Forces and contact positions are inertial; thrust is body-frame.

Evaluation works on the extended vector ``xe = E x + c`` which appends
constants and every piece's start time and duration (both linear in the
durations). Nonlinear terms are small per-node kernels acting on gathered
slices of ``xe``; their local Jacobians/Hessians (by automatic
differentiation) are scattered into sparse global matrices. Rows of the
equality/inequality stacks are fixed linear combinations of kernel outputs
plus a linear part in ``xe``.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import NamedTuple

import jax
import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from .. import _jax  # noqa: F401  (x64 + compile cache)
from ..heightmap import bilinear
from ..schedule import CONTACT, arm_phase_kinds, staggered_schedule
from .problem import OcpProblem

# composite Simpson with 4 sub-intervals: integral = duration * sum(w * f(frac))
QUAD_FRACS = np.linspace(0.0, 1.0, 5)
QUAD_WEIGHTS = np.array([1.0, 4.0, 2.0, 4.0, 1.0]) / 12.0
BOX_FRACS = (0.0, 0.25, 0.5, 0.75)
# dynamics nodes per base segment: a point defect at the start, one Simpson impulse row
DYN_FRACS = (0.0, 0.5, 1.0)
DYN_WEIGHTS = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0)

FORCE_SCALE = 10.0
PIECE = 14  # start, duration, v0, s0, v1, s1


class Layout:
    """Named blocks of a flat vector."""

    def __init__(self):
        self._blocks = OrderedDict()
        self.size = 0

    def add(self, name, shape, scale=1.0):
        shape = tuple(int(s) for s in shape)
        self._blocks[name] = (self.size, shape, float(scale))
        self.size += int(np.prod(shape))

    def __contains__(self, name):
        return name in self._blocks

    def names(self):
        return list(self._blocks)

    def slice(self, name):
        off, shape, _ = self._blocks[name]
        return slice(off, off + int(np.prod(shape)))

    def index(self, name):
        """Flat positions of a block, shaped like the block."""
        off, shape, _ = self._blocks[name]
        return off + np.arange(int(np.prod(shape))).reshape(shape)

    def unpack(self, x):
        return {k: x[o:o + int(np.prod(s))].reshape(s) for k, (o, s, _) in self._blocks.items()}

    def pack(self, values):
        x = np.zeros(self.size)
        for k, (o, s, _) in self._blocks.items():
            if k not in values:
                raise KeyError(f"missing block {k!r}")
            x[o:o + int(np.prod(s))] = np.broadcast_to(np.asarray(values[k], dtype=float), s).reshape(-1)
        return x

    def scales(self):
        out = np.ones(self.size)
        for o, s, sc in self._blocks.values():
            out[o:o + int(np.prod(s))] = sc
        return out

    def table(self):
        return [(k, o, o + int(np.prod(s)), s) for k, (o, s, _) in self._blocks.items()]


class Pieces(NamedTuple):
    start: np.ndarray  # (P,)
    dur: np.ndarray  # (P,)
    v0: np.ndarray  # (P, 3)
    s0: np.ndarray
    v1: np.ndarray
    s1: np.ndarray


def hermite(v0, s0, v1, s1, T, tau, order=0):
    """Cubic Hermite value/slope/curvature; ``T`` and ``tau`` lack the trailing value axis."""
    xp = jnp if any(isinstance(a, jax.Array) or isinstance(a, jax.core.Tracer) for a in (v0, s0, v1, s1, T, tau)) else np
    T = xp.asarray(T)[..., None]
    tau = xp.asarray(tau)[..., None]
    a2 = (3.0 * (v1 - v0) - T * (2.0 * s0 + s1)) / T**2
    a3 = (2.0 * (v0 - v1) + T * (s0 + s1)) / T**3
    if order == 0:
        return v0 + tau * (s0 + tau * (a2 + tau * a3))
    if order == 1:
        return s0 + tau * (2.0 * a2 + 3.0 * tau * a3)
    return 2.0 * a2 + 6.0 * a3 * tau


def eval_pieces(p: Pieces, idx, tau, order=0):
    return hermite(p.v0[idx], p.s0[idx], p.v1[idx], p.s1[idx], p.dur[idx], tau, order)


def eval_time(p: Pieces, t, order=0):
    """Evaluate a piece table at times ``t``; knots belong to the later piece."""
    t = np.asarray(t, dtype=float)
    idx = np.clip(np.searchsorted(p.start, t, side="right") - 1, 0, len(p.start) - 1)
    return eval_pieces(p, idx, t - p.start[idx], order)


def euler_rotation(rpy):
    """ZYX body-to-inertial rotation."""
    r, p, y = rpy[..., 0], rpy[..., 1], rpy[..., 2]
    cr, sr, cp, sp_, cy, sy = jnp.cos(r), jnp.sin(r), jnp.cos(p), jnp.sin(p), jnp.cos(y), jnp.sin(y)
    rows = [
        [cy * cp, cy * sp_ * sr - sy * cr, cy * sp_ * cr + sy * sr],
        [sy * cp, sy * sp_ * sr + cy * cr, sy * sp_ * cr - cy * sr],
        [-sp_, cp * sr, cp * cr],
    ]
    return jnp.stack([jnp.stack(r_, axis=-1) for r_ in rows], axis=-2)


def body_rates(rpy, rpy_dot):
    """Body-frame angular velocity of ZYX Euler angles."""
    r, p = rpy[..., 0], rpy[..., 1]
    dr, dp, dy = rpy_dot[..., 0], rpy_dot[..., 1], rpy_dot[..., 2]
    return jnp.stack([
        dr - dy * jnp.sin(p),
        dp * jnp.cos(r) + dy * jnp.sin(r) * jnp.cos(p),
        -dp * jnp.sin(r) + dy * jnp.cos(r) * jnp.cos(p),
    ], axis=-1)


def body_accel(rpy, rpy_dot, rpy_ddot):
    """Body rates and their time derivative."""
    return jax.jvp(body_rates, (rpy, rpy_dot), (rpy_dot, rpy_ddot))


def _piece(z, tau, order=0):
    """Evaluate a gathered 14-entry piece at local time ``tau``."""
    return hermite(z[2:5], z[5:8], z[8:11], z[11:14], z[1], tau, order)


class Kernel:
    """Per-node function ``fn(z, d) -> (n_out,)`` with batched value/Jacobian/Hessian."""

    def __init__(self, fn, n_out):
        self.n_out = n_out
        self.value = jax.jit(jax.vmap(fn))
        self.jacobian = jax.jit(jax.vmap(jax.jacfwd(fn)))

        def weighted_hessian(z, d, w):
            return jax.hessian(lambda zz: jnp.dot(w, fn(zz, d)))(z)

        self.hessian = jax.jit(jax.vmap(weighted_hessian))


class _Gathered(NamedTuple):
    xe: np.ndarray
    idx: dict  # kernel name -> (N, L) int indices into xe
    data: dict  # kernel name -> (N, nd) floats


class Transcription:
    def __init__(self, problem: OcpProblem):
        self.problem = pb = problem
        model = pb.model
        self.K = pb.polys_per_segment
        self.n_arms = model.n_arms
        self.mass = model.mass
        self.inertia = np.asarray(model.centroidal_inertia)
        self.inertia_inv = np.linalg.inv(self.inertia)
        self.nominal = np.asarray(model.nominal_offsets)
        self.box = np.asarray(model.box_half_edges, dtype=float)
        lim = np.asarray(model.signed_thrust_limits)  # (neg, pos) magnitudes
        self.thrust_lo, self.thrust_hi = -lim[:, 0], lim[:, 1]
        self.h = pb.base_segment_duration
        self.n_seg = pb.n_base_segments
        self.knot_times = np.arange(self.n_seg + 1) * self.h
        self.p_start = pb.start_feet
        self.kinds = [arm_phase_kinds(pb.n_contacts[a], pb.starts_in_contact) for a in range(self.n_arms)]
        self.layout = self._build_layout()
        self.n = self.layout.size
        self._build_extension()
        self._build_nodes()
        self._build_kernels()
        self._build_rows()

    # ------------------------------------------------------------------ setup
    def _n_swings(self, a):
        return sum(k != CONTACT for k in self.kinds[a])

    def _build_layout(self):
        pb = self.problem
        lay = Layout()
        nk = self.n_seg + 1
        for name in ("base_pos", "base_vel", "base_rpy", "base_rate"):
            lay.add(name, (nk, 3))
        K = self.K
        for a in range(self.n_arms):
            n_c = pb.n_contacts[a]
            lay.add(f"dur{a}", (len(self.kinds[a]),))
            lay.add(f"contact{a}", (n_c - (1 if pb.starts_in_contact else 0), 3))
            lay.add(f"swing_pos{a}", (self._n_swings(a), K - 1, 3))
            lay.add(f"swing_vel{a}", (self._n_swings(a), K - 1, 3))
            lay.add(f"force_val{a}", (n_c, K - 1, 3), FORCE_SCALE)
            lay.add(f"force_slope{a}", (n_c, K - 1, 3), FORCE_SCALE)
            if pb.starts_in_contact:
                lay.add(f"force_start{a}", (2, 3), FORCE_SCALE)
            lay.add(f"force_end{a}", (2, 3), FORCE_SCALE)
        if pb.thrusters:
            nb = pb.n_thrust_segments
            lay.add("thrust_dur", (nb,))
            lay.add("thrust_val", (nb * K + 1, 3), FORCE_SCALE)
            lay.add("thrust_slope", (nb * K + 1, 3), FORCE_SCALE)
        return lay

    def _build_extension(self):
        """``xe = E x + c``: x, constants, phase starts and every piece's start/duration."""
        pb, lay, K, n = self.problem, self.layout, self.K, self.n
        rows, cols, vals = list(range(n)), list(range(n)), [1.0] * n
        const = [0.0] + list(self.p_start.ravel())
        self.zero = n
        size = n + len(const)
        Z3 = np.full(3, self.zero)

        def new_entry(coeffs):
            nonlocal size
            for c, v in coeffs:
                rows.append(size)
                cols.append(c)
                vals.append(v)
            size += 1
            return size - 1

        self.phase_start_idx = []  # per arm, (J+1,) indices into xe
        self.pos_tab, self.frc_tab = [], []  # per arm (P, 14)
        self.pos_phase, self.frc_phase = [], []  # phase of every piece
        self.contact_phase_of, self.swing_phase_of = [], []
        for a in range(self.n_arms):
            kinds = self.kinds[a]
            d = lay.index(f"dur{a}")
            starts = [new_entry([(d[i], 1.0) for i in range(j)]) for j in range(len(kinds) + 1)]
            self.phase_start_idx.append(np.array(starts))

            def piece(j, off, frac, v0, s0, v1, s1):
                s = new_entry([(d[i], 1.0) for i in range(j)] + ([(d[j], off)] if off else []))
                du = new_entry([(d[j], frac)])
                return np.concatenate([[s, du], v0, s0, v1, s1])

            free = lay.index(f"contact{a}")
            start_idx = n + 1 + 3 * a + np.arange(3)
            contacts = ([start_idx] if pb.starts_in_contact else []) + list(free)
            sp_, sv = lay.index(f"swing_pos{a}"), lay.index(f"swing_vel{a}")
            fv, fs = lay.index(f"force_val{a}"), lay.index(f"force_slope{a}")
            ptab, ftab, pph, fph = [], [], [], []
            cmap, smap = {}, {}
            ci = si = 0
            for j, kind in enumerate(kinds):
                if kind == CONTACT:
                    cmap[j] = ci
                    c = contacts[ci]
                    ptab.append(piece(j, 0.0, 1.0, c, Z3, c, Z3))
                    pph.append(j)
                    f0, d0 = lay.index(f"force_start{a}") if (j == 0 and pb.starts_in_contact) else (Z3, Z3)
                    f1, d1 = lay.index(f"force_end{a}") if j == len(kinds) - 1 else (Z3, Z3)
                    fvals = [f0] + [fv[ci, k] for k in range(K - 1)] + [f1]
                    fslopes = [d0] + [fs[ci, k] for k in range(K - 1)] + [d1]
                    for k in range(K):
                        ftab.append(piece(j, k / K, 1.0 / K, fvals[k], fslopes[k], fvals[k + 1], fslopes[k + 1]))
                        fph.append(j)
                    ci += 1
                else:
                    smap[j] = si
                    prev = contacts[ci - 1] if j > 0 else start_idx
                    nxt = contacts[ci]
                    pvals = [prev] + [sp_[si, k] for k in range(K - 1)] + [nxt]
                    pslopes = [Z3] + [sv[si, k] for k in range(K - 1)] + [Z3]
                    for k in range(K):
                        ptab.append(piece(j, k / K, 1.0 / K, pvals[k], pslopes[k], pvals[k + 1], pslopes[k + 1]))
                        pph.append(j)
                    ftab.append(piece(j, 0.0, 1.0, Z3, Z3, Z3, Z3))
                    fph.append(j)
                    si += 1
            self.pos_tab.append(np.array(ptab))
            self.frc_tab.append(np.array(ftab))
            self.pos_phase.append(np.array(pph))
            self.frc_phase.append(np.array(fph))
            self.contact_phase_of.append(cmap)
            self.swing_phase_of.append(smap)

        self.thr_tab = None
        if pb.thrusters:
            tb = lay.index("thrust_dur")
            tv, ts = lay.index("thrust_val"), lay.index("thrust_slope")
            tab = []
            for i in range(pb.n_thrust_segments * K):
                seg, k = divmod(i, K)
                s = new_entry([(tb[q], 1.0) for q in range(seg)] + ([(tb[seg], k / K)] if k else []))
                du = new_entry([(tb[seg], 1.0 / K)])
                tab.append(np.concatenate([[s, du], tv[i], ts[i], tv[i + 1], ts[i + 1]]))
            self.thr_tab = np.array(tab)
        self.n_ext = size
        self.E = sp.csr_matrix((vals, (rows, cols)), shape=(size, n))
        self.c = np.zeros(size)
        self.c[n:n + len(const)] = const

    def extend(self, x):
        return self.E @ np.asarray(x, dtype=float) + self.c

    def _base_knot_idx(self, k):
        lay = self.layout
        return np.concatenate([lay.index(b)[k] for b in ("base_pos", "base_vel", "base_rpy", "base_rate")])

    def _build_nodes(self):
        K = self.K
        self.base_seg_tab = np.array([np.concatenate([self._base_knot_idx(k), self._base_knot_idx(k + 1)])
                                      for k in range(self.n_seg)])
        # dynamics nodes: both ends and the midpoint of every base segment
        nq = len(DYN_FRACS) - 1
        seg = np.minimum(np.arange(self.n_seg * nq + 1) // nq, self.n_seg - 1)
        frac = (np.arange(self.n_seg * nq + 1) - seg * nq) / nq
        self.dyn_seg, self.dyn_tau = seg, frac * self.h
        self.dyn_times = seg * self.h + self.dyn_tau
        box, clear = [], []
        for a in range(self.n_arms):
            first = {}
            for i, j in enumerate(self.pos_phase[a]):
                first.setdefault(int(j), i)
            for j, kind in enumerate(self.kinds[a]):
                for f in BOX_FRACS:
                    if kind == CONTACT:
                        box.append((a, first[j], f))
                    else:
                        k = int(np.floor(f * K + 1e-12))
                        box.append((a, first[j] + k, f * K - k))
                if kind != CONTACT:
                    # every swing-piece midpoint and every interior swing knot
                    for k in range(K):
                        clear.append((a, first[j] + k, 0.5))
                        if k < K - 1:
                            clear.append((a, first[j] + k, 1.0))
            box.append((a, first[len(self.kinds[a]) - 1], 1.0))
        self.box_nodes = box
        self.clear_nodes = clear
        self.box_piece_idx = np.array([self.pos_tab[a][i] for a, i, _ in box])
        self.box_data0 = np.array([[f, 0.0, *self.nominal[a]] for a, _, f in box])
        self.clear_idx = np.array([self.pos_tab[a][i] for a, i, _ in clear]).reshape(-1, PIECE)
        self.clear_data = np.array([[f] for _, _, f in clear]).reshape(-1, 1)
        contacts = [self.layout.index(f"contact{a}") for a in range(self.n_arms)]
        self.dock_idx = np.concatenate(contacts).reshape(-1, 3)
        # running-cost pieces: contact forces, swing velocities, thrust
        w = self.problem.weights
        idx, data = [], []
        sig_f = np.asarray(w.force, dtype=float)
        sig_e = np.full(3, w.swing_velocity)
        for a in range(self.n_arms):
            for i, j in enumerate(self.frc_phase[a]):
                if self.kinds[a][j] == CONTACT and sig_f.any():
                    idx.append(self.frc_tab[a][i])
                    data.append(np.concatenate([sig_f, np.zeros(3)]))
            for i, j in enumerate(self.pos_phase[a]):
                if self.kinds[a][j] != CONTACT and w.swing_velocity > 0.0:
                    idx.append(self.pos_tab[a][i])
                    data.append(np.concatenate([np.zeros(3), sig_e]))
        if self.thr_tab is not None and w.thrust > 0.0:
            for row in self.thr_tab:
                idx.append(row)
                data.append(np.concatenate([np.full(3, w.thrust), np.zeros(3)]))
        self.cost_piece_idx = np.array(idx, dtype=int).reshape(-1, PIECE)
        self.cost_piece_data = np.array(data).reshape(-1, 6)

    def _map_fn(self):
        hm = self.problem.hmap
        if hm.is_grid:
            heights = jnp.asarray(hm.heights)
            origin, cell = hm.origin, hm.cell
            return lambda x, y: bilinear(heights, origin, cell, x, y, jnp)
        z0, gx, gy = hm.plane
        return lambda x, y: z0 + gx * x + gy * y

    def _build_kernels(self):
        pb = self.problem
        h, m = self.h, self.mass
        Iw = jnp.asarray(self.inertia)
        Iinv = jnp.asarray(self.inertia_inv)
        height = self._map_fn()
        delta = pb.clearance
        w = pb.weights
        sig_v = jnp.asarray(w.velocity, dtype=float)
        fr = jnp.asarray(QUAD_FRACS)
        qw = jnp.asarray(QUAD_WEIGHTS)

        def seg_pose(k0, k1, tau):
            T = jnp.asarray(h)
            return (hermite(k0[0:3], k0[3:6], k1[0:3], k1[3:6], T, tau),
                    hermite(k0[6:9], k0[9:12], k1[6:9], k1[9:12], T, tau))

        def dyn_arm(z, d):
            t, tau = d[0], d[1]
            pos, rpy = seg_pose(z[0:12], z[12:24], tau)
            p = _piece(z[24:38], t - z[24])
            f = _piece(z[38:52], t - z[38])
            torque = euler_rotation(rpy).T @ jnp.cross(p - pos, f)
            return jnp.concatenate([f / m, Iinv @ torque])

        def dyn_thrust(z, d):
            _, rpy = seg_pose(z[0:12], z[12:24], d[1])
            u = _piece(z[24:38], d[0] - z[24])
            return euler_rotation(rpy) @ u / m

        def base_seg(z, d):
            k0, k1 = z[0:12], z[12:24]
            T = jnp.asarray(h)

            def at(tau):
                acc = hermite(k0[0:3], k0[3:6], k1[0:3], k1[3:6], T, tau, 2)
                phi = hermite(k0[6:9], k0[9:12], k1[6:9], k1[9:12], T, tau)
                dphi = hermite(k0[6:9], k0[9:12], k1[6:9], k1[9:12], T, tau, 1)
                ddphi = hermite(k0[6:9], k0[9:12], k1[6:9], k1[9:12], T, tau, 2)
                om, om_dot = body_accel(phi, dphi, ddphi)
                return jnp.concatenate([acc, om_dot + Iinv @ jnp.cross(om, Iw @ om)])

            return jnp.concatenate([at(jnp.asarray(f * h)) for f in DYN_FRACS])

        def box(z, d):
            tau = d[0] * z[1]
            p = _piece(z[0:14], tau)
            tb = z[0] + tau - d[1]
            k0, k1 = z[14:26], z[26:38]
            T = jnp.asarray(h)
            pos = hermite(k0[0:3], k0[3:6], k1[0:3], k1[3:6], T, tb)
            rpy = hermite(k0[6:9], k0[9:12], k1[6:9], k1[9:12], T, tb)
            return euler_rotation(rpy).T @ (p - pos) - d[2:5]

        def clearance(z, d):
            p = _piece(z, d[0] * z[1])
            return jnp.atleast_1d(p[2] - height(p[0], p[1]) - delta)

        def docking(z, d):
            return jnp.atleast_1d(z[2] - height(z[0], z[1]))

        def thrust_mid(z, d):
            return _piece(z, 0.5 * z[1])

        def cost_piece(z, d):
            # d = order-0 weights (3), order-1 weights (3)
            T = z[1] * jnp.ones(5)
            args = (z[2:5][None], z[5:8][None], z[8:11][None], z[11:14][None], T, z[1] * fr)
            dens = jnp.sum(d[0:3] * hermite(*args, 0) ** 2 + d[3:6] * hermite(*args, 1) ** 2, axis=-1)
            return jnp.atleast_1d(z[1] * jnp.sum(qw * dens))

        def cost_base(z, d):
            k0, k1 = z[0:12], z[12:24]
            T = h * jnp.ones(5)
            tau = h * fr
            v = hermite(k0[0:3][None], k0[3:6][None], k1[0:3][None], k1[3:6][None], T, tau, 1)
            total = h * jnp.sum(qw * jnp.sum(sig_v * v**2, axis=-1))
            if w.angular_rate > 0.0:
                phi = hermite(k0[6:9][None], k0[9:12][None], k1[6:9][None], k1[9:12][None], T, tau, 0)
                dphi = hermite(k0[6:9][None], k0[9:12][None], k1[6:9][None], k1[9:12][None], T, tau, 1)
                om = body_rates(phi, dphi)
                total = total + w.angular_rate * h * jnp.sum(qw * jnp.sum(om**2, axis=-1))
            return jnp.atleast_1d(total)

        # name -> (kernel, is_cost)
        ks = OrderedDict()
        ks["base_seg"] = (Kernel(base_seg, 6 * len(DYN_FRACS)), False)
        ks["dyn_arm"] = (Kernel(dyn_arm, 6), False)
        if pb.thrusters:
            ks["dyn_thrust"] = (Kernel(dyn_thrust, 3), False)
            ks["thrust_mid"] = (Kernel(thrust_mid, 3), False)
        ks["docking"] = (Kernel(docking, 1), False)
        ks["box"] = (Kernel(box, 3), False)
        if len(self.clear_nodes):
            ks["clearance"] = (Kernel(clearance, 1), False)
        if len(self.cost_piece_idx):
            ks["cost_piece"] = (Kernel(cost_piece, 1), True)
        ks["cost_base"] = (Kernel(cost_base, 1), True)
        self.kernels = ks

    # ---------------------------------------------------------------- gather
    def _select(self, xe, tab, t):
        starts = xe[tab[:, 0]]
        return np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(tab) - 1)

    def gather(self, x):
        xe = self.extend(x)
        idx, data = {}, {}
        idx["base_seg"] = self.base_seg_tab
        data["base_seg"] = np.zeros((self.n_seg, 1))
        td = self.dyn_times
        segs = self.base_seg_tab[self.dyn_seg]
        node_data = np.stack([td, self.dyn_tau], axis=1)
        parts = []
        for a in range(self.n_arms):
            ip = self._select(xe, self.pos_tab[a], td)
            jf = self._select(xe, self.frc_tab[a], td)
            parts.append(np.concatenate([segs, self.pos_tab[a][ip], self.frc_tab[a][jf]], axis=1))
        # node-major, arm-minor
        idx["dyn_arm"] = np.stack(parts, axis=1).reshape(-1, parts[0].shape[1])
        data["dyn_arm"] = np.repeat(node_data, self.n_arms, axis=0)
        if self.thr_tab is not None:
            it = self._select(xe, self.thr_tab, td)
            idx["dyn_thrust"] = np.concatenate([segs, self.thr_tab[it]], axis=1)
            data["dyn_thrust"] = node_data
            idx["thrust_mid"] = self.thr_tab
            data["thrust_mid"] = np.zeros((len(self.thr_tab), 1))
        idx["docking"] = self.dock_idx
        data["docking"] = np.zeros((len(self.dock_idx), 1))
        bp = self.box_piece_idx
        tb = xe[bp[:, 0]] + self.box_data0[:, 0] * xe[bp[:, 1]]
        seg = np.clip(np.floor(tb / self.h + 1e-12), 0, self.n_seg - 1).astype(int)
        idx["box"] = np.concatenate([bp, self.base_seg_tab[seg]], axis=1)
        bd = self.box_data0.copy()
        bd[:, 1] = seg * self.h
        data["box"] = bd
        idx["clearance"] = self.clear_idx
        data["clearance"] = self.clear_data
        idx["cost_piece"] = self.cost_piece_idx
        data["cost_piece"] = self.cost_piece_data
        idx["cost_base"] = self.base_seg_tab
        data["cost_base"] = np.zeros((self.n_seg, 1))
        return _Gathered(xe, idx, data)

    # ------------------------------------------------------------------ rows
    def _build_rows(self):
        """Static maps from kernel outputs and ``xe`` to the named residual rows."""
        pb, lay = self.problem, self.layout
        # output offsets of every constraint kernel in the stacked output vector
        self.out_offset = OrderedDict()
        off = 0
        counts = {
            "base_seg": self.n_seg, "dyn_arm": len(self.dyn_times) * self.n_arms, "dyn_thrust": len(self.dyn_times),
            "thrust_mid": 0 if self.thr_tab is None else len(self.thr_tab), "docking": len(self.dock_idx),
            "box": len(self.box_nodes), "clearance": len(self.clear_nodes),
        }
        for name, (kern, is_cost) in self.kernels.items():
            if is_cost:
                continue
            self.out_offset[name] = (off, counts[name], kern.n_out)
            off += counts[name] * kern.n_out
        self.n_out = off

        def out(name, node, comp):
            o, _, w = self.out_offset[name]
            return o + node * w + comp

        eq = _RowBuilder(self.n_out, self.n_ext)
        ineq = _RowBuilder(self.n_out, self.n_ext)

        # (a) boundary
        eq.begin("boundary")
        for k, target_p, target_r in ((0, pb.start_position, pb.start_rpy), (self.n_seg, pb.goal_position, pb.goal_rpy)):
            for block, target in (("base_pos", target_p), ("base_vel", np.zeros(3)),
                                  ("base_rpy", target_r), ("base_rate", np.zeros(3))):
                for i in range(3):
                    eq.row(lin=[(lay.index(block)[k, i], 1.0)], const=-target[i])
        # (b) partitions
        eq.begin("partition")
        for a in range(self.n_arms):
            eq.row(lin=[(self.phase_start_idx[a][-1], 1.0)], const=-pb.duration)
        if pb.thrusters:
            eq.row(lin=[(i, 1.0) for i in lay.index("thrust_dur")], const=-pb.duration)
        # (c) dynamics defect at the start of every base segment plus the
        # Simpson impulse of the defect over it; a row at the segment end too
        # would be near-dependent whenever the defect is close to linear
        nq = len(DYN_FRACS) - 1

        def defect(k, q, comp):
            node = k * nq + q
            terms = [(out("base_seg", k, 6 * q + comp), 1.0)]
            terms += [(out("dyn_arm", node * self.n_arms + a, comp), -1.0) for a in range(self.n_arms)]
            if comp < 3 and self.thr_tab is not None:
                terms.append((out("dyn_thrust", node, comp), -1.0))
            return terms

        for label, comp0 in (("dynamics_linear", 0), ("dynamics_angular", 3)):
            eq.begin(label)
            for k in range(self.n_seg):
                for i in range(3):
                    eq.row(outs=defect(k, 0, comp0 + i))
            for k in range(self.n_seg):
                for i in range(3):
                    eq.row(outs=[(j, self.h * DYN_WEIGHTS[q] * v) for q in range(nq + 1)
                                 for j, v in defect(k, q, comp0 + i)])
        # (e) docking
        eq.begin("docking")
        for i in range(len(self.dock_idx)):
            eq.row(outs=[(out("docking", i, 0), 1.0)])

        # (d) kinematic box: xi - rel >= 0 and xi + rel >= 0
        ineq.begin("kinematic_box")
        for sign in (-1.0, 1.0):
            for i, (a, _, _) in enumerate(self.box_nodes):
                for c in range(3):
                    ineq.row(outs=[(out("box", i, c), sign)], const=self.box[a, c])
        # (f) clearance
        ineq.begin("clearance")
        for i in range(len(self.clear_nodes)):
            ineq.row(outs=[(out("clearance", i, 0), 1.0)])
        # (g) thruster bounds at knots and piece midpoints
        ineq.begin("thrust")
        if pb.thrusters:
            tv = lay.index("thrust_val")
            for sign, bound in ((1.0, -self.thrust_lo), (-1.0, self.thrust_hi)):
                for i in range(len(tv)):
                    for c in range(3):
                        ineq.row(lin=[(tv[i, c], sign)], const=bound[c])
                for i in range(len(self.thr_tab)):
                    for c in range(3):
                        ineq.row(outs=[(out("thrust_mid", i, c), sign)], const=bound[c])
        # (h) one swing at a time, in the configured lift-off order
        ineq.begin("sequencing")
        if pb.sequential_swings:
            ps = self.phase_start_idx
            ev = self.swing_events()
            for (a0, j0), (a1, j1) in zip(ev[:-1], ev[1:]):
                ineq.row(lin=[(ps[a1][j1], 1.0), (ps[a0][j0 + 1], -1.0)])
            if not pb.starts_in_contact and ev:
                a1, j1 = ev[0]
                for a in range(self.n_arms):
                    ineq.row(lin=[(ps[a1][j1], 1.0), (ps[a][1], -1.0)])
        self.eq_rows = eq.finish()
        self.ineq_rows = ineq.finish()
        self.eq_slices = self.eq_rows.slices
        self.ineq_slices = self.ineq_rows.slices
        self.n_eq = self.eq_rows.n
        self.n_ineq = self.ineq_rows.n
        # linear parts mapped to x
        self._eq_lin_x = (self.eq_rows.A @ self.E).tocsr()
        self._in_lin_x = (self.ineq_rows.A @ self.E).tocsr()

    def lower_bounds(self):
        """Simple lower bounds on x: duration floors; ``-inf`` elsewhere."""
        pb, lay = self.problem, self.layout
        lb = np.full(self.n, -np.inf)
        for a in range(self.n_arms):
            floors = [pb.min_phase_duration if k == CONTACT else pb.min_swing_duration for k in self.kinds[a]]
            lb[lay.index(f"dur{a}")] = floors
        if pb.thrusters:
            lb[lay.index("thrust_dur")] = pb.min_thrust_segment
        return lb

    def swing_events(self):
        """Gait swings in lift-off order as ``(arm, phase)``; the approach swing is excluded."""
        gait = []
        for a in range(self.n_arms):
            gait.append([j for j, k in enumerate(self.kinds[a])
                         if k != CONTACT and not (j == 0 and not self.problem.starts_in_contact)])
        events = []
        for j in range(max(len(g) for g in gait)):
            for a in self.problem.swing_order:
                if j < len(gait[a]):
                    events.append((a, gait[a][j]))
        return events

    # ------------------------------------------------------------ evaluation
    def _kernel_values(self, g: _Gathered):
        outs, cost = [], 0.0
        for name, (kern, is_cost) in self.kernels.items():
            z = g.xe[g.idx[name]]
            val = np.asarray(kern.value(z, g.data[name]))
            if is_cost:
                cost += float(val.sum())
            else:
                outs.append(val.ravel())
        return cost, (np.concatenate(outs) if outs else np.zeros(0))

    def evaluate(self, x, gathered=None):
        """``(cost, equalities, inequalities)`` as numpy arrays."""
        g = self.gather(x) if gathered is None else gathered
        cost, outs = self._kernel_values(g)
        eq = self.eq_rows.S @ outs + self.eq_rows.A @ g.xe + self.eq_rows.b
        ineq = self.ineq_rows.S @ outs + self.ineq_rows.A @ g.xe + self.ineq_rows.b
        return cost, eq, ineq

    def cost(self, x):
        return self.evaluate(x)[0]

    def equalities(self, x):
        return self.evaluate(x)[1]

    def inequalities(self, x):
        return self.evaluate(x)[2]

    def named_equalities(self, x):
        eq = self.evaluate(x)[1]
        return {k: eq[s] for k, s in self.eq_slices.items()}

    def named_inequalities(self, x):
        ineq = self.evaluate(x)[2]
        return {k: ineq[s] for k, s in self.ineq_slices.items()}

    def derivatives(self, x, gathered=None):
        """Cost gradient and sparse constraint Jacobians ``(grad, J_eq, J_ineq)`` w.r.t. x."""
        g = self.gather(x) if gathered is None else gathered
        grad = np.zeros(self.n_ext)
        r, c, v = [], [], []
        for name, (kern, is_cost) in self.kernels.items():
            z = g.xe[g.idx[name]]
            jac = np.asarray(kern.jacobian(z, g.data[name]))  # (N, n_out, L)
            if is_cost:
                np.add.at(grad, g.idx[name], jac[:, 0, :])
                continue
            o = self.out_offset[name][0]
            N, n_out, L = jac.shape
            rows = o + np.arange(N)[:, None] * n_out + np.arange(n_out)[None, :]
            r.append(np.broadcast_to(rows[:, :, None], jac.shape).ravel())
            c.append(np.broadcast_to(g.idx[name][:, None, :], jac.shape).ravel())
            v.append(jac.ravel())
        J_out = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                              shape=(self.n_out, self.n_ext))
        J_out_x = J_out @ self.E
        J_eq = (self.eq_rows.S @ J_out_x + self._eq_lin_x).tocsr()
        J_in = (self.ineq_rows.S @ J_out_x + self._in_lin_x).tocsr()
        return self.E.T @ grad, J_eq, J_in

    def lagrangian_hessian(self, x, lam_eq, lam_ineq, obj_factor=1.0, gathered=None):
        """Sparse Hessian of ``obj_factor * cost + lam_eq . eq + lam_ineq . ineq`` w.r.t. x."""
        g = self.gather(x) if gathered is None else gathered
        w_out = self.eq_rows.S.T @ np.asarray(lam_eq) + self.ineq_rows.S.T @ np.asarray(lam_ineq)
        r, c, v = [], [], []
        for name, (kern, is_cost) in self.kernels.items():
            idx = g.idx[name]
            N = idx.shape[0]
            if N == 0:
                continue
            if is_cost:
                w = np.full((N, 1), obj_factor)
            else:
                o, _, n_out = self.out_offset[name]
                w = w_out[o:o + N * n_out].reshape(N, n_out)
            hess = np.asarray(kern.hessian(g.xe[idx], g.data[name], w))  # (N, L, L)
            r.append(np.broadcast_to(idx[:, :, None], hess.shape).ravel())
            c.append(np.broadcast_to(idx[:, None, :], hess.shape).ravel())
            v.append(hess.ravel())
        H = sp.csr_matrix((np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                          shape=(self.n_ext, self.n_ext))
        return (self.E.T @ H @ self.E).tocsr()

    # -------------------------------------------------------- trajectories
    def arm_pieces(self, x, a):
        """Position and force pieces of arm ``a``."""
        xe = self.extend(x)
        return _pieces_from(xe, self.pos_tab[a]), _pieces_from(xe, self.frc_tab[a])

    def thrust_pieces(self, x):
        if self.thr_tab is None:
            return None
        return _pieces_from(self.extend(x), self.thr_tab)

    def base_pieces(self, x):
        v = self.layout.unpack(np.asarray(x, dtype=float))
        start = self.knot_times[:-1]
        dur = np.full(self.n_seg, self.h)
        pos = Pieces(start, dur, v["base_pos"][:-1], v["base_vel"][:-1], v["base_pos"][1:], v["base_vel"][1:])
        rpy = Pieces(start, dur, v["base_rpy"][:-1], v["base_rate"][:-1], v["base_rpy"][1:], v["base_rate"][1:])
        return pos, rpy

    def phase_durations(self, x):
        v = self.layout.unpack(np.asarray(x, dtype=float))
        return [np.asarray(v[f"dur{a}"]) for a in range(self.n_arms)]

    # ---------------------------------------------------------------- seeding
    def initial_guess(self):
        pb = self.problem
        n_c = set(pb.n_contacts)
        if len(n_c) != 1:
            raise ValueError("seeding assumes the same number of contact phases on every arm")
        t_app = 0.0
        if not pb.starts_in_contact:
            t_app = pb.approach_time if pb.approach_time is not None else 0.2 * pb.duration
        sched = staggered_schedule(self.n_arms, n_c.pop(), pb.duration, pb.starts_in_contact,
                                   pb.swing_order, approach_time=t_app if t_app else None)

        def base_seed(t, order):
            t = np.asarray(t, dtype=float)
            # vertical approach first, then the horizontal transfer
            s_z, ds_z = _smoothstep(t, 0.0, t_app if t_app > 0 else pb.duration)
            s_xy, ds_xy = _smoothstep(t, t_app, pb.duration)
            delta = pb.goal_position - pb.start_position
            drpy = pb.goal_rpy - pb.start_rpy
            if order == 0:
                p = pb.start_position + np.stack([s_xy * delta[0], s_xy * delta[1], s_z * delta[2]], -1)
                return p, pb.start_rpy + s_xy[..., None] * drpy
            p = np.stack([ds_xy * delta[0], ds_xy * delta[1], ds_z * delta[2]], -1)
            return p, ds_xy[..., None] * drpy

        vals = {}
        tk = self.knot_times
        vals["base_pos"], vals["base_rpy"] = base_seed(tk, 0)
        vals["base_vel"], vals["base_rate"] = base_seed(tk, 1)

        def base_accel(t, eps=1e-4):
            lo, hi = max(t - eps, 0.0), min(t + eps, pb.duration)
            v_lo, w_lo = base_seed(np.array([lo]), 1)
            v_hi, w_hi = base_seed(np.array([hi]), 1)
            return (v_hi[0] - v_lo[0]) / (hi - lo), (w_hi[0] - w_lo[0]) / (hi - lo)

        def allocate(t):
            """Minimum-norm contact forces producing the seeded base wrench at ``t``."""
            t = min(t, pb.duration)
            d, rpy = (v[0] for v in base_seed(np.array([t]), 0))
            rpy_dot = base_seed(np.array([t]), 1)[1][0]
            acc, rpy_ddot = base_accel(t)
            w, dw = (np.asarray(v) for v in body_accel(jnp.asarray(rpy), jnp.asarray(rpy_dot), jnp.asarray(rpy_ddot)))
            rot = np.asarray(euler_rotation(jnp.asarray(rpy)))
            torque = rot @ (self.inertia @ dw + np.cross(w, self.inertia @ w))
            arms = [a for a in range(self.n_arms) if sched.in_contact(a, t)]
            out = np.zeros((self.n_arms, 3))
            if not arms:
                return out
            A = np.zeros((6, 3 * len(arms)))
            for k, a in enumerate(arms):
                ci = self.contact_phase_of[a][sched.phase_at(a, t).index]
                rx, ry, rz = feet[a][ci] - d
                A[:3, 3 * k:3 * k + 3] = np.eye(3)
                A[3:, 3 * k:3 * k + 3] = [[0.0, -rz, ry], [rz, 0.0, -rx], [-ry, rx, 0.0]]
            sol = np.linalg.lstsq(A, np.concatenate([pb.model.mass * acc, torque]), rcond=None)[0]
            out[arms] = sol.reshape(-1, 3)
            return out

        K = self.K
        feet = []
        for a in range(self.n_arms):
            kinds = self.kinds[a]
            durs = np.asarray(sched.arms[a].durations)
            vals[f"dur{a}"] = durs
            bounds = np.concatenate([[0.0], np.cumsum(durs)])
            contacts = []
            for j, kind in enumerate(kinds):
                if kind != CONTACT:
                    continue
                if j == 0 and pb.starts_in_contact:
                    contacts.append(self.p_start[a])
                    continue
                tm = 0.5 * (bounds[j] + bounds[j + 1]) if j < len(kinds) - 1 else pb.duration
                d, r = base_seed(np.array([tm]), 0)
                p = d[0] + np.asarray(euler_rotation(jnp.asarray(r[0]))) @ self.nominal[a]
                p[2] = pb.hmap.height_at(p[0], p[1])
                contacts.append(p)
            contacts = np.array(contacts)
            vals[f"contact{a}"] = contacts[1:] if pb.starts_in_contact else contacts
            sw_p = np.zeros((self._n_swings(a), K - 1, 3))
            sw_v = np.zeros_like(sw_p)
            for j, si in self.swing_phase_of[a].items():
                prev = contacts[self.contact_phase_of[a][j - 1]] if j > 0 else self.p_start[a]
                nxt = contacts[self.contact_phase_of[a][j + 1]]
                for k in range(K - 1):
                    s = (k + 1) / K
                    p = prev + s * (nxt - prev)
                    lifted = max(p[2], pb.hmap.height_at(p[0], p[1]) + 2.0 * pb.clearance)
                    sw_v[si, k] = (nxt - prev) / durs[j]
                    if lifted > p[2]:
                        sw_v[si, k, 2] = 0.0
                    p[2] = lifted
                    sw_p[si, k] = p
            vals[f"swing_pos{a}"] = sw_p
            vals[f"swing_vel{a}"] = sw_v
            feet.append(contacts)
        for a in range(self.n_arms):
            durs = np.asarray(sched.arms[a].durations)
            bounds = np.concatenate([[0.0], np.cumsum(durs)])
            fv = np.zeros((pb.n_contacts[a], K - 1, 3))
            for j, ci in self.contact_phase_of[a].items():
                for k in range(K - 1):
                    fv[ci, k] = allocate(bounds[j] + (k + 1) * durs[j] / K)[a]
            vals[f"force_val{a}"] = fv
            vals[f"force_slope{a}"] = np.zeros_like(fv)
            if pb.starts_in_contact:
                vals[f"force_start{a}"] = np.stack([allocate(0.0)[a], np.zeros(3)])
            vals[f"force_end{a}"] = np.stack([allocate(pb.duration)[a], np.zeros(3)])
        if pb.thrusters:
            nb = pb.n_thrust_segments
            vals["thrust_dur"] = np.full(nb, pb.duration / nb)
            vals["thrust_val"] = np.zeros((nb * K + 1, 3))
            vals["thrust_slope"] = np.zeros((nb * K + 1, 3))
        return self.layout.pack(vals)


class _Rows(NamedTuple):
    S: sp.csr_matrix  # rows x kernel outputs
    A: sp.csr_matrix  # rows x xe
    b: np.ndarray
    slices: OrderedDict
    n: int


class _RowBuilder:
    def __init__(self, n_out, n_ext):
        self.n_out, self.n_ext = n_out, n_ext
        self.s, self.a, self.b = [], [], []
        self.slices = OrderedDict()
        self.n = 0
        self._name = None

    def begin(self, name):
        self._close()
        self._name, self._start = name, self.n

    def _close(self):
        if self._name is not None:
            self.slices[self._name] = slice(self._start, self.n)

    def row(self, outs=(), lin=(), const=0.0):
        for j, v in outs:
            self.s.append((self.n, j, v))
        for j, v in lin:
            self.a.append((self.n, j, v))
        self.b.append(const)
        self.n += 1

    def finish(self):
        self._close()

        def mat(trip, ncol):
            if not trip:
                return sp.csr_matrix((self.n, ncol))
            r, c, v = zip(*trip)
            return sp.csr_matrix((v, (r, c)), shape=(self.n, ncol))

        return _Rows(mat(self.s, self.n_out), mat(self.a, self.n_ext), np.asarray(self.b, dtype=float),
                     self.slices, self.n)


def _pieces_from(xe, tab):
    z = xe[tab]
    return Pieces(z[:, 0], z[:, 1], z[:, 2:5], z[:, 5:8], z[:, 8:11], z[:, 11:14])


def _smoothstep(t, t0, t1):
    s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    inside = (t > t0) & (t < t1)
    return 3 * s**2 - 2 * s**3, np.where(inside, (6 * s - 6 * s**2) / (t1 - t0), 0.0)
