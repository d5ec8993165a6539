"""Problem construction, solve and sweeps."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..heightmap import MapBoundsError
from ..scenario import ConfigError, ScenarioConfig, pose_position
from ..schedule import ContactSchedule
from .nlp import ScaledNlp
from .problem import CostWeights, OcpProblem, ProblemError
from .solution import OcpSolution, VectorSpline
from .solver import SolverOptions, solve_nlp
from .transcription import Transcription

log = logging.getLogger(__name__)


def build_problem(cfg: ScenarioConfig, **overrides) -> OcpProblem:
    """Problem for a scenario; ``overrides`` replace problem fields."""
    model, hmap = cfg.load_model(), cfg.load_map()
    try:
        start = pose_position(model, hmap, cfg.start)
        goal = pose_position(model, hmap, cfg.goal)
        weights = CostWeights(**{k: tuple(v) if isinstance(v, list) else v for k, v in cfg.weights.items()})
        kw = dict(
            model=model, hmap=hmap,
            start_position=start, start_rpy=np.asarray(cfg.start.rpy),
            goal_position=goal, goal_rpy=np.asarray(cfg.goal.rpy),
            duration=cfg.duration, n_contacts=int(cfg.contacts),
            starts_in_contact=cfg.start.height == 0.0,
            n_thrust_segments=cfg.thrust_segments, polys_per_segment=cfg.polys_per_segment,
            base_segment_duration=cfg.base_segment, weights=weights, clearance=cfg.clearance,
            thrusters=cfg.thrusters, sequential_swings=cfg.sequential_swings,
            approach_time=cfg.approach_time, name=cfg.name,
        )
        if cfg.swing_order is not None:
            kw["swing_order"] = cfg.swing_order
        kw.update(overrides)
        return OcpProblem(**kw)
    except (ProblemError, MapBoundsError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def cost(x, prob_or_tr) -> float:
    return _transcription(prob_or_tr).cost(x)


def constraints(x, prob_or_tr):
    """Named equality and inequality slices ``(eq, ineq)``; inequalities are margins ``>= 0``."""
    tr = _transcription(prob_or_tr)
    return tr.named_equalities(x), tr.named_inequalities(x)


def _transcription(obj):
    return obj if isinstance(obj, Transcription) else Transcription(obj)


def residual_report(tr: Transcription, x) -> dict:
    eq, ineq = tr.named_equalities(x), tr.named_inequalities(x)
    out = {}
    for k, v in eq.items():
        out[f"eq_{k}"] = float(np.abs(v).max(initial=0.0))
    for k, v in ineq.items():
        out[f"ineq_{k}"] = float(v.min(initial=np.inf)) if v.size else float("inf")
    all_eq = np.concatenate(list(eq.values()))
    all_in = np.concatenate(list(ineq.values()))
    out["max_eq"] = float(np.abs(all_eq).max(initial=0.0))
    out["max_ineq_violation"] = float(max(0.0, -all_in.min(initial=0.0)))
    lb = tr.lower_bounds()
    fin = np.isfinite(lb)
    out["max_bound_violation"] = float(max(0.0, (lb[fin] - x[fin]).max(initial=0.0)))
    return out


def solution_from_x(tr: Transcription, x, result=None, wall_time=0.0) -> OcpSolution:
    pb = tr.problem
    pos, rpy = tr.base_pieces(x)
    ee, frc = [], []
    for a in range(tr.n_arms):
        p, f = tr.arm_pieces(x, a)
        ee.append(VectorSpline.from_pieces(p))
        frc.append(VectorSpline.from_pieces(f))
    thr = tr.thrust_pieces(x)
    thrust = VectorSpline.from_pieces(thr) if thr is not None else VectorSpline.zeros(pb.duration)
    durs = tr.phase_durations(x)
    # renormalise away round-off in the partition so the schedule validates
    durs = [d * (pb.duration / d.sum()) for d in durs]
    sched = ContactSchedule.from_durations(durs, pb.starts_in_contact, total=pb.duration)
    res = residual_report(tr, x)
    if result is not None:
        res["stationarity"] = result.stationarity
        res["complementarity"] = result.complementarity
    return OcpSolution(
        base_position=VectorSpline.from_pieces(pos),
        base_rpy=VectorSpline.from_pieces(rpy),
        ee_position=ee, force=frc, thrust=thrust, schedule=sched,
        cost=float(tr.cost(x)), residuals=res,
        converged=bool(result.converged) if result is not None else False,
        status=result.status if result is not None else "unsolved",
        iterations=result.iterations if result is not None else 0,
        wall_time=wall_time, x=np.asarray(x), problem=pb,
        meta={"name": pb.name, "n_variables": tr.n, "n_eq": tr.n_eq, "n_ineq": tr.n_ineq},
    )


@dataclass
class PlanResult:
    solution: OcpSolution
    transcription: Transcription


def solve(prob: OcpProblem, options: SolverOptions | None = None, x0=None, return_transcription=False):
    """Solve the planning problem; returns an :class:`OcpSolution`."""
    t0 = time.perf_counter()
    tr = Transcription(prob)
    nlp = ScaledNlp(tr)
    seed = tr.initial_guess() if x0 is None else np.asarray(x0, dtype=float)
    opts = options or SolverOptions(max_iter=500)
    result = solve_nlp(nlp, nlp.to_y(seed), opts)
    x = nlp.to_x(result.x)
    sol = solution_from_x(tr, x, result, wall_time=time.perf_counter() - t0)
    log.info("%s: %s after %d iterations, cost %.6g, max eq %.2e, %.1f s",
             prob.name, result.status, result.iterations, sol.cost, sol.residuals["max_eq"], sol.wall_time)
    return (sol, tr) if return_transcription else sol


@dataclass(frozen=True)
class AblationRow:
    label: str
    value: int
    converged: bool
    cost: float
    max_eq: float
    max_ineq_violation: float
    iterations: int
    solve_time: float
    max_swing_displacement: float
    peak_force: float

    def as_dict(self):
        return dict(self.__dict__)


def max_swing_displacement(sol: OcpSolution) -> float:
    """Largest end-effector travel between consecutive contact phases of one arm."""
    best = 0.0
    for a, arm in enumerate(sol.schedule.arms):
        b = arm.boundaries
        for j, kind in enumerate(arm.kinds):
            if kind == "swing":
                # the approach swing of an airborne start is not a gait step
                if j == 0 and not arm.starts_in_contact:
                    continue
                p0, p1 = sol.ee_position[a](b[j]), sol.ee_position[a](b[j + 1])
                best = max(best, float(np.linalg.norm(p1 - p0)))
    return best


def _row(label, value, sol: OcpSolution):
    return AblationRow(label, int(value), sol.converged, sol.cost, sol.residuals["max_eq"],
                       sol.residuals["max_ineq_violation"], sol.iterations, sol.wall_time,
                       max_swing_displacement(sol), float(sol.peak_force().max()))


def ablate_polynomials(prob: OcpProblem, counts, options=None):
    """Re-solve with each polynomials-per-segment count."""
    rows, sols = [], []
    for k in counts:
        sol = solve(prob.with_(polys_per_segment=int(k)), options)
        rows.append(_row("polys", k, sol))
        sols.append(sol)
    return rows, sols


def ablate_contacts(prob: OcpProblem, counts, options=None):
    """Re-solve with each number of contact phases per arm."""
    rows, sols = [], []
    for n in counts:
        sol = solve(prob.with_(n_contacts=(int(n),) * prob.model.n_arms), options)
        rows.append(_row("contacts", n, sol))
        sols.append(sol)
    return rows, sols
