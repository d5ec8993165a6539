"""Planned trajectories, residual report and file I/O."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..rigid_body import ThrusterCommand
from ..schedule import ContactSchedule
from ..spline import HermiteSegment, PhaseSpline, sample_times

CSV_VERSION = 1


class VectorSpline:
    """Three scalar phase splines evaluated together."""

    def __init__(self, channels):
        self.channels = tuple(channels)

    @classmethod
    def from_pieces(cls, pieces):
        chans = []
        for c in range(3):
            segs = [HermiteSegment(float(d), float(a), float(b), float(e), float(f))
                    for d, a, b, e, f in zip(pieces.dur, pieces.v0[:, c], pieces.s0[:, c], pieces.v1[:, c], pieces.s1[:, c])]
            chans.append(PhaseSpline(segs, t0=float(pieces.start[0])))
        return cls(chans)

    @classmethod
    def zeros(cls, duration):
        return cls([PhaseSpline.constant(0.0, duration) for _ in range(3)])

    @property
    def duration(self):
        return self.channels[0].duration

    def __call__(self, t, order=0):
        return np.stack([np.asarray(ch(t, order)) for ch in self.channels], axis=-1)


def _csv_columns(n_arms):
    cols = ["t", "d_x", "d_y", "d_z", "roll", "pitch", "yaw"]
    for a in range(n_arms):
        cols += [f"p{a}_x", f"p{a}_y", f"p{a}_z"]
    for a in range(n_arms):
        cols += [f"f{a}_x", f"f{a}_y", f"f{a}_z"]
    cols += ["u_x", "u_y", "u_z"]
    cols += [f"contact{a}" for a in range(n_arms)]
    return cols


@dataclass
class OcpSolution:
    base_position: VectorSpline
    base_rpy: VectorSpline
    ee_position: list
    force: list
    thrust: VectorSpline
    schedule: ContactSchedule
    cost: float
    residuals: dict
    converged: bool
    status: str
    iterations: int
    wall_time: float
    x: np.ndarray | None = None
    problem: object = None
    meta: dict = field(default_factory=dict)

    @property
    def duration(self):
        return self.schedule.total

    @property
    def n_arms(self):
        return len(self.ee_position)

    def thruster_channels(self, t):
        """Six non-negative thruster magnitudes ``(N, 6)`` at times ``t``."""
        u = np.atleast_2d(self.thrust(t))
        return np.array([ThrusterCommand.from_signed(ui).magnitudes for ui in u])

    def contact_flags(self, t):
        t = np.atleast_1d(t)
        return np.array([self.schedule.contact_flags(min(ti, self.duration)) for ti in t])

    def peak_force(self, rate=100.0):
        """Peak contact-force magnitude per arm over a uniform grid."""
        t = sample_times(self.duration, rate)
        return np.array([np.linalg.norm(f(t), axis=-1).max() for f in self.force])

    def sample(self, rate=100.0):
        t = sample_times(self.duration, rate)
        cols = [t[:, None], self.base_position(t), self.base_rpy(t)]
        cols += [p(t) for p in self.ee_position]
        cols += [f(t) for f in self.force]
        cols += [self.thrust(t), self.contact_flags(t).astype(float)]
        return t, np.hstack(cols)

    # ------------------------------------------------------------------ files
    def to_csv(self, path, rate=100.0):
        _, data = self.sample(rate)
        cols = _csv_columns(self.n_arms)
        with open(path, "w", newline="") as fh:
            fh.write(f"# orbcrawl plan v{CSV_VERSION}: {','.join(cols)}\n")
            w = csv.writer(fh)
            w.writerow(cols)
            for row in data:
                w.writerow([repr(float(v)) for v in row])

    def phase_table(self):
        return [{"arm": a, "phase": j, "kind": k, "start": s, "end": e} for a, j, k, s, e in self.schedule.to_rows()]

    def report(self):
        final = self.base_position(self.duration)
        out = {
            "converged": bool(self.converged),
            "status": self.status,
            "cost": float(self.cost),
            "iterations": int(self.iterations),
            "wall_time": float(self.wall_time),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "final_position": [float(v) for v in final],
            "peak_force": [float(v) for v in self.peak_force()],
            "phases": self.phase_table(),
        }
        if self.problem is not None:
            goal = np.asarray(self.problem.goal_position)
            out["goal_position"] = goal.tolist()
            out["final_position_error"] = [float(v) for v in final - goal]
            out["displacement"] = [float(v) for v in final - np.asarray(self.problem.start_position)]
        out.update(self.meta)
        return out

    def write(self, out_dir, rate=100.0):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.to_csv(out / "solution.csv", rate)
        with open(out / "report.json", "w") as fh:
            json.dump(self.report(), fh, indent=2)
        with open(out / "phases.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["arm", "phase", "kind", "start", "end"])
            for row in self.schedule.to_rows():
                w.writerow([row[0], row[1], row[2], repr(row[3]), repr(row[4])])
        return out


@dataclass
class SampledPlan:
    """A plan reloaded from CSV; channels interpolate the written samples."""

    t: np.ndarray
    base_position: VectorSpline
    base_rpy: VectorSpline
    ee_position: list
    force: list
    thrust: VectorSpline
    contact: np.ndarray  # (N, arms) bool

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def n_arms(self):
        return len(self.ee_position)

    def contact_flags(self, t):
        idx = np.clip(np.searchsorted(self.t, np.atleast_1d(t) + 1e-12, side="right") - 1, 0, len(self.t) - 1)
        return self.contact[idx]


def load_plan_csv(path) -> SampledPlan:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n_arms = sum(1 for c in header if c.startswith("contact"))
    if header != _csv_columns(n_arms):
        raise ValueError(f"unexpected plan columns in {path}")
    t = body[:, 0]

    def vec(i):
        chans = []
        for c in range(3):
            y = body[:, i + c]
            chans.append(PhaseSpline.from_knots(np.diff(t), y, np.gradient(y, t), t0=t[0]))
        return VectorSpline(chans)

    k = 7 + 3 * n_arms
    return SampledPlan(
        t=t,
        base_position=vec(1),
        base_rpy=vec(4),
        ee_position=[vec(7 + 3 * a) for a in range(n_arms)],
        force=[vec(k + 3 * a) for a in range(n_arms)],
        thrust=vec(k + 3 * n_arms),
        contact=body[:, k + 3 * n_arms + 3:] > 0.5,
    )
