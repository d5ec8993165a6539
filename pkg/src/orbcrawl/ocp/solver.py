"""Primal-dual interior-point method for sparse NLPs with exact Hessians.

Solves ``min f(x)  s.t.  c(x) = 0,  g(x) >= 0,  x >= lb`` with slacks for
the general inequalities, a log barrier on slacks and bounded variables,
a filter line search with second-order corrections, monotone barrier
updates and inertia-corrected factorisation of the condensed KKT matrix

    [ W + Jg' S^-1 Z Jg + X^-1 Z_L + dw I    Jc'   ]
    [ Jc                                    -dc I  ]

Multiplier convention: ``grad f + Jc' lam - Jg' z - z_L = 0`` with
``z, z_L >= 0``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)


class NlpFunctions(Protocol):
    n: int
    n_eq: int
    n_ineq: int

    def lower_bounds(self) -> np.ndarray: ...

    def evaluate(self, x) -> tuple: ...  # (f, c, g)

    def derivatives(self, x) -> tuple: ...  # (grad, Jc, Jg) sparse

    def hessian(self, x, lam_eq, lam_ineq, obj_factor) -> sp.spmatrix: ...


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 300
    tol: float = 1e-6  # overall scaled optimality error
    eq_tol: float = 1e-6  # unscaled max |c|
    ineq_tol: float = 1e-7  # unscaled max(0, -g)
    dual_tol: float = 1e-4  # scaled stationarity
    compl_tol: float = 1e-4
    acceptable_eq: float = 1e-4
    acceptable_ineq: float = 1e-6
    acceptable_dual: float = 1e-3
    mu_init: float = 0.1
    mu_min: float = 1e-9
    kappa_eps: float = 10.0
    kappa_mu: float = 0.2
    theta_mu: float = 1.5
    tau_min: float = 0.99
    slack_push: float = 1e-2
    armijo: float = 1e-4
    max_backtracks: int = 30
    time_limit: float = np.inf
    obj_scale_max_grad: float = 100.0
    constraint_scaling: bool = True
    verbose: bool = False


@dataclass
class SolverResult:
    x: np.ndarray
    lam_eq: np.ndarray
    z_ineq: np.ndarray
    cost: float
    converged: bool
    status: str
    iterations: int
    wall_time: float
    max_eq: float
    max_ineq_violation: float
    stationarity: float
    complementarity: float
    history: list = field(default_factory=list)


class KktFactor:
    """Dense symmetric-indefinite factorisation with inertia."""

    def __init__(self, K):
        self.lu, self.d, self.perm = sla.ldl(K, lower=True, hermitian=True, check_finite=False)
        self.L = self.lu[self.perm]
        n = K.shape[0]
        sub = np.diag(self.d, -1)
        self.blocks = np.zeros(n, bool)  # True at the first row of a 2x2 block
        i = 0
        while i < n - 1:
            if sub[i] != 0.0:
                self.blocks[i] = True
                i += 2
            else:
                i += 1
        diag = np.diag(self.d).copy()
        pos = neg = zero = 0
        self._diag = diag
        self._off = np.zeros(n)
        i = 0
        while i < n:
            if self.blocks[i]:
                a, b, c = diag[i], sub[i], diag[i + 1]
                self._off[i] = b
                ev = np.linalg.eigvalsh(np.array([[a, b], [b, c]]))
                for e in ev:
                    if e == 0.0:
                        zero += 1
                    elif e > 0:
                        pos += 1
                    else:
                        neg += 1
                i += 2
            else:
                e = diag[i]
                if e == 0.0:
                    zero += 1
                elif e > 0:
                    pos += 1
                else:
                    neg += 1
                i += 1
        self.inertia = (pos, neg, zero)

    def solve(self, b):
        y = sla.solve_triangular(self.L, b[self.perm], lower=True, unit_diagonal=True, check_finite=False)
        w = self._block_solve(y)
        v = sla.solve_triangular(self.L.T, w, lower=False, unit_diagonal=True, check_finite=False)
        x = np.empty_like(v)
        x[self.perm] = v
        return x

    def _block_solve(self, y):
        d, off = self._diag, self._off
        w = np.empty_like(y)
        one = ~(self.blocks | np.roll(self.blocks, 1))
        w[one] = y[one] / d[one]
        i = np.nonzero(self.blocks)[0]
        if len(i):
            a, b, c = d[i], off[i], d[i + 1]
            det = a * c - b * b
            w[i] = (c * y[i] - b * y[i + 1]) / det
            w[i + 1] = (a * y[i + 1] - b * y[i]) / det
        return w


def solve_nlp(nlp: NlpFunctions, x0, options: SolverOptions | None = None, callback=None) -> SolverResult:
    opt = options or SolverOptions()
    t_start = time.perf_counter()
    n, me, mi = nlp.n, nlp.n_eq, nlp.n_ineq
    lb = np.asarray(nlp.lower_bounds(), dtype=float)
    bnd = np.isfinite(lb)
    x = np.asarray(x0, dtype=float).copy()
    # start strictly inside the variable bounds
    push = opt.slack_push * np.maximum(1.0, np.abs(lb[bnd]))
    x[bnd] = np.maximum(x[bnd], lb[bnd] + push)

    f, c, g = nlp.evaluate(x)
    grad, Jc, Jg = nlp.derivatives(x)
    # objective and row scaling from the starting gradients
    gmax = np.abs(grad).max() if n else 0.0
    sf = min(1.0, opt.obj_scale_max_grad / gmax) if gmax > 0 else 1.0
    if opt.constraint_scaling:
        sc = _row_scale(Jc, opt.obj_scale_max_grad)
        sg = _row_scale(Jg, opt.obj_scale_max_grad)
    else:
        sc, sg = np.ones(me), np.ones(mi)

    def scaled(f, c, g):
        return sf * f, sc * c, sg * g

    def scaled_der(grad, Jc, Jg):
        return sf * grad, sp.diags(sc) @ Jc, sp.diags(sg) @ Jg

    F, C, G = scaled(f, c, g)
    dF, JC, JG = scaled_der(grad, Jc, Jg)

    mu = opt.mu_init
    s = np.maximum(G, opt.slack_push * np.maximum(1.0, np.abs(G)))
    z = mu / s
    xl = x[bnd] - lb[bnd]
    zl = mu / xl
    lam = _ls_multipliers(dF, JC, JG, z, zl, bnd, n)
    dw_last = 0.0
    filt = []
    theta_max = theta_min = None
    n_fail = 0
    history = []
    status = "max_iter"
    it = 0

    def errors(mu_):
        rd = dF + JC.T @ lam - JG.T @ z
        rd[bnd] -= zl
        s_max = 100.0
        sd = max(s_max, (np.abs(lam).sum() + np.abs(z).sum() + np.abs(zl).sum()) / max(me + mi + bnd.sum(), 1)) / s_max
        scm = max(s_max, (np.abs(z).sum() + np.abs(zl).sum()) / max(mi + bnd.sum(), 1)) / s_max
        dual = np.abs(rd).max() / sd if n else 0.0
        primal = max(np.abs(C).max(initial=0.0), np.abs(G - s).max(initial=0.0))
        compl = max(np.abs(s * z - mu_).max(initial=0.0), np.abs(xl * zl - mu_).max(initial=0.0)) / scm
        return dual, primal, compl

    best = None
    for it in range(opt.max_iter + 1):
        dual, primal, compl = errors(0.0)
        max_eq = np.abs(c).max(initial=0.0)
        max_viol = max(0.0, -g.min(initial=0.0))
        history.append((it, float(f), float(max_eq), float(max_viol), float(dual), float(compl), float(mu)))
        if opt.verbose:
            log.info("it %3d f %.6e eq %.2e viol %.2e dual %.2e compl %.2e mu %.1e",
                     it, f, max_eq, max_viol, dual, compl, mu)
        if callback is not None:
            callback(it, x, f, max_eq)
        score = (max_eq <= opt.acceptable_eq and max_viol <= opt.acceptable_ineq, -max(max_eq, max_viol), -dual)
        if best is None or score > best[0]:
            best = (score, x.copy(), lam.copy(), z.copy(), float(f), it)
        if (max_eq <= opt.eq_tol and max_viol <= opt.ineq_tol and dual <= opt.dual_tol
                and compl <= opt.compl_tol):
            status = "converged"
            break
        if it == opt.max_iter:
            break
        if time.perf_counter() - t_start > opt.time_limit:
            status = "time_limit"
            break

        # barrier update
        while True:
            d_mu, p_mu, c_mu = errors(mu)
            if max(d_mu, p_mu, c_mu) <= opt.kappa_eps * mu and mu > opt.mu_min:
                mu = max(opt.mu_min, min(opt.kappa_mu * mu, mu**opt.theta_mu))
                filt = []
            else:
                break

        W = nlp.hessian(x, sc * lam, -sg * z, sf)
        W = np.asarray(W.todense()) if sp.issparse(W) else np.asarray(W)
        Sig = z / s
        H = W + (JG.T @ sp.diags(Sig) @ JG).toarray()
        diag_b = np.zeros(n)
        diag_b[bnd] = zl / xl
        H[np.diag_indices(n)] += diag_b
        rd = dF + JC.T @ lam - JG.T @ z
        rd[bnd] -= zl
        rg = G - s
        rhs_x = -rd + JG.T @ (mu / s - z) - JG.T @ (Sig * rg)
        rhs_x[bnd] += mu / xl - zl
        rhs = np.concatenate([rhs_x, -C])

        factor, dw, dc = _factorize(H, JC, n, me, dw_last, mu)
        if factor is None:
            status = "singular_kkt"
            break
        dw_last = dw
        K_mat = _kkt(H, JC, dw, dc)
        sol = _refine(factor, K_mat, rhs)
        dx, dlam = sol[:n], sol[n:]
        ds = JG @ dx + rg
        dz = mu / s - z - Sig * ds
        dzl = mu / xl - zl - (zl / xl) * dx[bnd]

        tau = max(opt.tau_min, 1.0 - mu)
        a_p = min(_max_step(s, ds, tau), _max_step(xl, dx[bnd], tau))
        a_d = min(_max_step(z, dz, tau), _max_step(zl, dzl, tau))

        # filter line search on (infeasibility, barrier objective)
        theta0 = np.abs(C).sum() + np.abs(rg).sum()
        phi0 = F - mu * np.sum(np.log(s)) - mu * np.sum(np.log(xl))
        dphi = dF @ dx - mu * np.sum(ds / s) - mu * np.sum(dx[bnd] / xl)
        if theta_max is None:
            theta_max = 1e4 * max(1.0, theta0)
            theta_min = 1e-4 * max(1.0, theta0)

        def trial(xt, st):
            ft, ct, gt = nlp.evaluate(xt)
            Ft, Ct, Gt = scaled(ft, ct, gt)
            xlt = xt[bnd] - lb[bnd]
            th = np.abs(Ct).sum() + np.abs(Gt - st).sum()
            ph = Ft - mu * np.sum(np.log(st)) - mu * np.sum(np.log(xlt))
            return th, ph, (ft, ct, gt, Ft, Ct, Gt)

        def acceptable(th, ph, alpha):
            if not (np.isfinite(th) and np.isfinite(ph)) or th > theta_max:
                return None
            if any(th >= ft_ and ph >= fp_ for ft_, fp_ in filt):
                return None
            switching = dphi < 0 and alpha * (-dphi) ** 2.3 > theta0**1.1
            if switching and theta0 <= theta_min:
                return "f" if ph <= phi0 + opt.armijo * alpha * dphi else None
            if th <= (1 - 1e-5) * theta0 or ph <= phi0 - 1e-8 * theta0:
                return "h"
            return None

        alpha = a_p
        alpha_min = 1e-12
        accepted = kind = None
        for k in range(opt.max_backtracks):
            xt = x + alpha * dx
            st = s + alpha * ds
            th, ph, evals = trial(xt, st)
            kind = acceptable(th, ph, alpha)
            if kind is not None:
                accepted = (xt, st, evals)
                break
            if k == 0 and np.isfinite(th) and th >= theta0:
                # second-order corrections against the constraint curvature
                th_old = theta0
                c_soc, g_soc = alpha * C + evals[4], alpha * rg + (evals[5] - st)
                for _ in range(4):
                    rhs_soc = np.concatenate([rhs_x - (-JG.T @ (Sig * rg)) - JG.T @ (Sig * g_soc), -c_soc])
                    corr = factor.solve(rhs_soc)
                    px = corr[:n]
                    ps = JG @ px + g_soc
                    a_soc = min(_max_step(s, ps, tau), _max_step(xl, px[bnd], tau))
                    xs, ss = x + a_soc * px, s + a_soc * ps
                    th_s, ph_s, ev_s = trial(xs, ss)
                    kind = acceptable(th_s, ph_s, alpha)
                    if kind is not None:
                        accepted = (xs, ss, ev_s)
                        break
                    if not np.isfinite(th_s) or th_s > 0.99 * th_old:
                        break
                    th_old = th_s
                    c_soc = a_soc * c_soc + ev_s[4]
                    g_soc = a_soc * g_soc + (ev_s[5] - ss)
                if accepted is not None:
                    break
            alpha *= 0.5
            if alpha < alpha_min:
                break
        if accepted is None:
            # no restoration phase: take a short step, reset the filter and regularise
            dw_last = max(dw_last * 10.0, 1e-4)
            filt = []
            alpha = max(alpha, 1e-4 * a_p)
            xt = x + alpha * dx
            st = s + alpha * ds
            _, _, evals = trial(xt, st)
            accepted = (xt, st, evals)
            n_fail += 1
            if n_fail > 10:
                status = "line_search_failed"
                break
        else:
            n_fail = 0
            if kind == "h":
                filt.append(((1 - 1e-5) * theta0, phi0 - 1e-8 * theta0))
        if opt.verbose:
            log.info("    alpha %.2e a_p %.2e a_d %.2e dw %.1e |dx| %.2e %s", alpha, a_p, a_d, dw, np.abs(dx).max(), kind)
        x, s, evals = accepted
        f, c, g, F, C, G = evals
        s = np.maximum(s, 1e-300)
        lam = lam + alpha * dlam
        z = z + a_d * dz
        zl = zl + a_d * dzl
        xl = x[bnd] - lb[bnd]
        # keep multipliers close to the central path
        kappa_sigma = 1e10
        z = np.clip(z, mu / (kappa_sigma * s), kappa_sigma * mu / s)
        zl = np.clip(zl, mu / (kappa_sigma * xl), kappa_sigma * mu / xl)
        grad, Jc, Jg = nlp.derivatives(x)
        dF, JC, JG = scaled_der(grad, Jc, Jg)

    wall = time.perf_counter() - t_start
    dual, primal, compl = errors(0.0)
    max_eq = float(np.abs(c).max(initial=0.0))
    max_viol = float(max(0.0, -g.min(initial=0.0)))
    converged = status == "converged"
    if not converged and best is not None and best[0][0] and best[5] != it:
        # fall back to the best feasible iterate seen
        x, lam, z, f = best[1], best[2], best[3], best[4]
        f, c, g = nlp.evaluate(x)
        max_eq = float(np.abs(c).max(initial=0.0))
        max_viol = float(max(0.0, -g.min(initial=0.0)))
    acceptable = max_eq <= opt.acceptable_eq and max_viol <= opt.acceptable_ineq and dual <= opt.acceptable_dual
    if not converged and acceptable and status in ("max_iter", "line_search_failed", "time_limit"):
        status = "acceptable"
        converged = True
    return SolverResult(x=x, lam_eq=sc * lam, z_ineq=sg * z, cost=float(f), converged=converged, status=status,
                        iterations=it, wall_time=wall, max_eq=max_eq, max_ineq_violation=max_viol,
                        stationarity=float(dual), complementarity=float(compl), history=history)


def _row_scale(J, max_grad):
    if J.shape[0] == 0:
        return np.ones(0)
    rmax = np.asarray(abs(J).max(axis=1).todense()).ravel()
    return np.where(rmax > max_grad, max_grad / np.maximum(rmax, 1e-300), 1.0)


def _ls_multipliers(dF, JC, JG, z, zl, bnd, n):
    """Least-squares equality multipliers for the starting point."""
    me = JC.shape[0]
    if me == 0:
        return np.zeros(0)
    r = -(dF - JG.T @ z)
    r[bnd] += zl
    A = JC.T.tocsc() if sp.issparse(JC) else JC.T
    lam = sp.linalg.lsqr(A, r, atol=1e-10, btol=1e-10, iter_lim=500)[0]
    if not np.all(np.isfinite(lam)) or np.abs(lam).max(initial=0.0) > 1e3:
        return np.zeros(me)
    return lam


def _kkt(H, JC, dw, dc):
    n = H.shape[0]
    me = JC.shape[0]
    Jd = JC.toarray() if sp.issparse(JC) else JC
    K = np.zeros((n + me, n + me))
    K[:n, :n] = H
    K[np.arange(n), np.arange(n)] += dw
    K[n:, :n] = Jd
    K[:n, n:] = Jd.T
    K[np.arange(n, n + me), np.arange(n, n + me)] = -dc
    return K


def _factorize(H, JC, n, me, dw_last, mu):
    dc = 0.0
    dw = 0.0
    first = True
    for _ in range(60):
        factor = KktFactor(_kkt(H, JC, dw, dc))
        pos, neg, zero = factor.inertia
        if pos == n and neg == me and zero == 0:
            return factor, dw, dc
        if zero > 0 and dc == 0.0:
            dc = 1e-8 * mu**0.25
            continue
        if dw == 0.0:
            dw = 1e-4 if dw_last == 0.0 else max(1e-20, dw_last / 3.0)
        else:
            dw *= 100.0 if (first and dw_last == 0.0) else 8.0
            first = False
        if dw > 1e40:
            break
    return None, dw, dc


def _refine(factor, K, rhs, steps=2):
    sol = factor.solve(rhs)
    for _ in range(steps):
        res = rhs - K @ sol
        if np.abs(res).max() <= 1e-12 * max(1.0, np.abs(rhs).max()):
            break
        sol = sol + factor.solve(res)
    return sol


def _max_step(v, dv, tau):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))
