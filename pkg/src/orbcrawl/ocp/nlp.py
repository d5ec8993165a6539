"""Scaled NLP view of a transcription for the interior-point solver."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .transcription import Transcription


class ScaledNlp:
    """Works in ``y = x / scale`` and caches the gathered node data per point."""

    def __init__(self, tr: Transcription):
        self.tr = tr
        self.n, self.n_eq, self.n_ineq = tr.n, tr.n_eq, tr.n_ineq
        self.scale = tr.layout.scales()
        self._D = sp.diags(self.scale)
        self._key = None
        self._gathered = None
        self.n_evals = 0

    def to_x(self, y):
        return self.scale * y

    def to_y(self, x):
        return np.asarray(x) / self.scale

    def _gather(self, y):
        key = y.tobytes()
        if key != self._key:
            self._gathered = self.tr.gather(self.to_x(y))
            self._key = key
        return self._gathered

    def lower_bounds(self):
        return self.tr.lower_bounds() / self.scale

    def evaluate(self, y):
        self.n_evals += 1
        g = self._gather(y)
        return self.tr.evaluate(self.to_x(y), gathered=g)

    def derivatives(self, y):
        g = self._gather(y)
        grad, Je, Ji = self.tr.derivatives(self.to_x(y), gathered=g)
        return self.scale * grad, (Je @ self._D).tocsr(), (Ji @ self._D).tocsr()

    def hessian(self, y, lam_eq, lam_ineq, obj_factor):
        g = self._gather(y)
        H = self.tr.lagrangian_hessian(self.to_x(y), lam_eq, lam_ineq, obj_factor, gathered=g)
        return (self._D @ H @ self._D).tocsr()
