"""Per-arm alternating contact/swing phase bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spline import MIN_DURATION

CONTACT = "contact"
SWING = "swing"

# Default lift-off order LF -> RH -> RF -> LH, as indices into (LF, LH, RF, RH).
DEFAULT_SWING_ORDER = (0, 3, 2, 1)


@dataclass(frozen=True)
class PhaseInfo:
    kind: str
    index: int
    local_time: float


@dataclass(frozen=True)
class ArmPhases:
    durations: tuple
    starts_in_contact: bool

    def kind(self, j):
        in_contact = (j % 2 == 0) == self.starts_in_contact
        return CONTACT if in_contact else SWING

    @property
    def kinds(self):
        return tuple(self.kind(j) for j in range(len(self.durations)))

    @property
    def boundaries(self):
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def n_contacts(self):
        return sum(k == CONTACT for k in self.kinds)


class ContactSchedule:
    """Alternating phase durations for every arm, each summing to ``total``."""

    def __init__(self, arms: Sequence[ArmPhases], total: float, tol=1e-9, floor=MIN_DURATION):
        self.arms = tuple(arms)
        self.total = float(total)
        for i, arm in enumerate(self.arms):
            d = np.asarray(arm.durations, dtype=float)
            if len(d) == 0:
                raise ValueError(f"arm {i} has no phases")
            if np.any(d < floor - 1e-12):
                raise ValueError(f"arm {i} has a phase shorter than the floor {floor}")
            if abs(d.sum() - self.total) > tol * max(1.0, self.total):
                raise ValueError(f"arm {i} phase durations sum to {d.sum()}, expected {self.total}")

    @classmethod
    def from_durations(cls, durations, starts_in_contact, total=None):
        durations = [tuple(float(x) for x in d) for d in durations]
        if isinstance(starts_in_contact, bool):
            starts_in_contact = [starts_in_contact] * len(durations)
        total = sum(durations[0]) if total is None else total
        return cls([ArmPhases(d, s) for d, s in zip(durations, starts_in_contact)], total)

    @classmethod
    def from_boundaries(cls, boundaries, starts_in_contact):
        """Inverse of :attr:`ArmPhases.boundaries`."""
        durs = [np.diff(np.asarray(b, dtype=float)) for b in boundaries]
        total = float(boundaries[0][-1])
        if isinstance(starts_in_contact, bool):
            starts_in_contact = [starts_in_contact] * len(durs)
        return cls([ArmPhases(tuple(d), s) for d, s in zip(durs, starts_in_contact)], total)

    @property
    def n_arms(self):
        return len(self.arms)

    def phase_at(self, arm, t):
        """``PhaseInfo`` of ``arm`` at time ``t``; phases are half-open ``[start, end)``."""
        if t < -1e-12 or t > self.total + 1e-9 * max(1.0, self.total):
            raise ValueError(f"t={t} outside [0, {self.total}]")
        phases = self.arms[arm]
        bounds = phases.boundaries
        j = int(np.searchsorted(bounds, t, side="right") - 1)
        j = min(max(j, 0), len(phases.durations) - 1)
        return PhaseInfo(phases.kind(j), j, float(t - bounds[j]))

    def in_contact(self, arm, t):
        return self.phase_at(arm, t).kind == CONTACT

    def count_in_contact(self, t):
        return sum(self.in_contact(a, t) for a in range(self.n_arms))

    def contact_flags(self, t):
        return np.array([self.in_contact(a, t) for a in range(self.n_arms)])

    def boundaries(self):
        return [arm.boundaries for arm in self.arms]

    def to_rows(self):
        """Phase table rows ``(arm, phase, kind, start, end)``."""
        rows = []
        for a, arm in enumerate(self.arms):
            b = arm.boundaries
            for j in range(len(arm.durations)):
                rows.append((a, j, arm.kind(j), float(b[j]), float(b[j + 1])))
        return rows


def arm_phase_kinds(n_contacts, starts_in_contact):
    """Kinds of the alternating phase list for one arm.

    Starting in contact: ``C S C ... C`` (``2N - 1`` phases). Starting in
    the air: ``S C S ... C`` (``2N`` phases). Both end in contact so the robot
    is docked at the goal.
    """
    if n_contacts < 1:
        raise ValueError("need at least one contact phase per arm")
    n = 2 * n_contacts - 1 if starts_in_contact else 2 * n_contacts
    arm = ArmPhases(tuple([1.0] * n), starts_in_contact)
    return arm.kinds


def staggered_schedule(n_arms, n_contacts, total, starts_in_contact=True, order=None, approach_time=None):
    """Seed gait: swings taken one arm at a time in ``order``.

    Every swing gets the same duration and the swings are spread evenly over
    the maneuver. With ``starts_in_contact=False`` every arm first flies for
    ``approach_time`` (all arms descend together) before the staggered gait.
    """
    order = tuple(range(n_arms)) if order is None else tuple(order)
    if sorted(order) != list(range(n_arms)):
        raise ValueError("order must be a permutation of the arms")
    n_swings = n_contacts - 1
    t_start = 0.0
    if not starts_in_contact:
        t_start = 0.2 * total if approach_time is None else approach_time
    arms = []
    if n_swings == 0:
        for _ in range(n_arms):
            d = (total,) if starts_in_contact else (t_start, total - t_start)
            arms.append(ArmPhases(d, starts_in_contact))
        return ContactSchedule(arms, total)
    slots = n_swings * n_arms
    # half a slot of settling time at both ends, swing takes 60% of its slot
    slot = (total - t_start) / (slots + 1)
    swing = 0.6 * slot
    for a in range(n_arms):
        rank = order.index(a)
        durs = [] if starts_in_contact else [t_start]
        t = t_start
        for j in range(n_swings):
            k = j * n_arms + rank
            lift = t_start + slot * (k + 0.5) + 0.5 * (slot - swing)
            durs.append(lift - t)
            durs.append(swing)
            t = lift + swing
        durs.append(total - t)
        arms.append(ArmPhases(tuple(durs), starts_in_contact))
    return ContactSchedule(arms, total)
