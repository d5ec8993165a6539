"""Target-distance curriculum for the base pose."""

from __future__ import annotations

from collections import deque

import numpy as np

from .config import CurriculumConfig


def curriculum_update(errors, current_range, cfg: CurriculumConfig | None = None):
    """Grow the base target range by one step iff the mean error is under the threshold."""
    cfg = cfg or CurriculumConfig()
    errors = np.asarray(errors, float).reshape(-1)
    if errors.size == 0:
        raise ValueError("curriculum update needs at least one error sample")
    new = current_range + cfg.step if errors.mean() < cfg.threshold else current_range
    if cfg.max_range is not None:
        new = min(new, max(cfg.max_range, current_range))
    return float(new)


class Curriculum:
    """Rolling window of per-episode mean base errors driving ``curriculum_update``."""

    def __init__(self, cfg: CurriculumConfig | None = None):
        self.cfg = cfg or CurriculumConfig()
        self.range = float(self.cfg.initial_range)
        self.window = deque(maxlen=self.cfg.window)
        self.stage = 0

    def record(self, episode_error):
        """Add one finished episode; returns True when the range grew."""
        self.window.append(float(episode_error))
        if len(self.window) < self.cfg.window:
            return False
        old = self.range
        self.range = curriculum_update(list(self.window), old, self.cfg)
        self.window.clear()
        grew = self.range > old
        self.stage += int(grew)
        return grew
