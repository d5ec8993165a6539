"""Cubic Hermite segments and piecewise-cubic phase splines."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MIN_DURATION = 1e-3


def hermite_coefficients(u0, du0, u1, du1, duration):
    """Coefficients ``(a0, a1, a2, a3)`` of the cubic matching value and slope at both ends."""
    if not duration > 0.0:
        raise ValueError(f"segment duration must be positive, got {duration}")
    T = duration
    a2 = (3.0 * (u1 - u0) - T * (2.0 * du0 + du1)) / T**2
    a3 = (2.0 * (u0 - u1) + T * (du0 + du1)) / T**3
    return (u0, du0, a2, a3)


@dataclass(frozen=True)
class HermiteSegment:
    duration: float
    u0: float
    du0: float
    u1: float
    du1: float

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ValueError("segment duration must be positive")

    @property
    def coefficients(self):
        return hermite_coefficients(self.u0, self.du0, self.u1, self.du1, self.duration)

    @classmethod
    def constant(cls, value, duration):
        return cls(duration, value, 0.0, value, 0.0)

    def __call__(self, tau, order=0):
        a0, a1, a2, a3 = self.coefficients
        tau = np.asarray(tau, dtype=float)
        if order == 0:
            return a0 + tau * (a1 + tau * (a2 + tau * a3))
        if order == 1:
            return a1 + tau * (2.0 * a2 + 3.0 * tau * a3)
        if order == 2:
            return 2.0 * a2 + 6.0 * a3 * tau
        raise ValueError("order must be 0, 1 or 2")


class PhaseSpline:
    """Scalar piecewise cubic built from Hermite segments joined end to end.

    Adjacent segments share their knot value and slope, so the spline is C1.
    """

    def __init__(self, segments: Sequence[HermiteSegment], t0=0.0, check=True):
        if not segments:
            raise ValueError("a spline needs at least one segment")
        self.segments = tuple(segments)
        self.t0 = float(t0)
        self._durations = np.array([s.duration for s in self.segments])
        self._starts = self.t0 + np.concatenate([[0.0], np.cumsum(self._durations)[:-1]])
        self._coef = np.array([s.coefficients for s in self.segments])
        if check:
            for a, b in zip(self.segments[:-1], self.segments[1:]):
                if abs(a.u1 - b.u0) > 1e-9 * max(1.0, abs(a.u1)) or abs(a.du1 - b.du0) > 1e-9 * max(1.0, abs(a.du1)):
                    raise ValueError("adjacent segments must share knot value and slope")

    @classmethod
    def from_knots(cls, durations, values, slopes, t0=0.0):
        durations = np.asarray(durations, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if len(values) != len(durations) + 1 or len(slopes) != len(values):
            raise ValueError("need one more knot than segments")
        segs = [
            HermiteSegment(float(d), float(values[k]), float(slopes[k]), float(values[k + 1]), float(slopes[k + 1]))
            for k, d in enumerate(durations)
        ]
        return cls(segs, t0=t0, check=False)

    @classmethod
    def constant(cls, value, duration, t0=0.0):
        return cls([HermiteSegment.constant(value, duration)], t0=t0)

    @property
    def durations(self):
        return self._durations.copy()

    @property
    def duration(self):
        return float(self._durations.sum())

    @property
    def knot_times(self):
        return np.concatenate([self._starts, [self.t0 + self.duration]])

    @property
    def knot_values(self):
        return np.array([s.u0 for s in self.segments] + [self.segments[-1].u1])

    @property
    def knot_slopes(self):
        return np.array([s.du0 for s in self.segments] + [self.segments[-1].du1])

    def __call__(self, t, order=0):
        return self.eval(t, order)

    def eval(self, t, order=0):
        """Value (order 0), slope (1) or curvature (2) at ``t``.

        Knots belong to the later segment; ``t = T`` uses the last one.
        """
        t_arr = np.asarray(t, dtype=float)
        end = self.t0 + self.duration
        tol = 1e-9 * max(1.0, abs(end))
        if np.any(t_arr < self.t0 - tol) or np.any(t_arr > end + tol):
            raise ValueError(f"t outside [{self.t0}, {end}]")
        idx = np.clip(np.searchsorted(self._starts, t_arr, side="right") - 1, 0, len(self.segments) - 1)
        tau = np.clip(t_arr - self._starts[idx], 0.0, self._durations[idx])
        a0, a1, a2, a3 = (self._coef[idx, k] for k in range(4))
        if order == 0:
            out = a0 + tau * (a1 + tau * (a2 + tau * a3))
        elif order == 1:
            out = a1 + tau * (2.0 * a2 + 3.0 * tau * a3)
        elif order == 2:
            out = 2.0 * a2 + 6.0 * a3 * tau
        else:
            raise ValueError("order must be 0, 1 or 2")
        return float(out) if np.ndim(out) == 0 else out

    def resample(self, rate):
        """Inclusive uniform grid ``0, 1/rate, ..., T``; returns ``(times, values)``."""
        return resample(self, rate)

    def split_equal(self, parts):
        """Spline with every segment cut into ``parts`` equal pieces (same curve)."""
        segs = []
        for seg in self.segments:
            h = seg.duration / parts
            for p in range(parts):
                a, b = p * h, (p + 1) * h
                segs.append(HermiteSegment(h, float(seg(a)), float(seg(a, 1)), float(seg(b)), float(seg(b, 1))))
        return PhaseSpline(segs, t0=self.t0, check=False)


def sample_times(duration, rate, t0=0.0):
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    n = int(round(duration * rate))
    times = t0 + np.arange(n + 1) / rate
    times[-1] = min(times[-1], t0 + duration)
    return times


def resample(spline: PhaseSpline, rate):
    times = sample_times(spline.duration, rate, spline.t0)
    return times, spline.eval(times)
