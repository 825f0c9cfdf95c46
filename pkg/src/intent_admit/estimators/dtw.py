"""Open-end dynamic time warping against an averaged Driving template.

The template is built by resampling every training trial's Driving-phase
feature sequence to a fixed length and averaging.  A partial query is matched
with an open end on the template axis; the best-matching template index,
normalized by the template length, is the time-progress estimate.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

TEMPLATE_LENGTH = 200


def resample_sequence(seq: np.ndarray, length: int) -> np.ndarray:
    """Linear resampling of (n, c) to (length, c) on a normalized index."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim == 1:
        seq = seq[:, None]
    n = seq.shape[0]
    if n < 2:
        return np.repeat(seq, length, axis=0)
    src = np.linspace(0.0, 1.0, n)
    dst = np.linspace(0.0, 1.0, length)
    return np.column_stack([np.interp(dst, src, seq[:, c]) for c in range(seq.shape[1])])


def open_end_dtw(query: np.ndarray, template: np.ndarray) -> tuple[int, np.ndarray]:
    """Match ``query`` to a prefix of ``template`` with a free template end.

    Symmetric-step dynamic program with Euclidean local distance; every query
    row must be consumed.  Returns (best template end index, normalized cost
    per template end index).
    """
    q = np.atleast_2d(np.asarray(query, dtype=float))
    t = np.atleast_2d(np.asarray(template, dtype=float))
    n, m = q.shape[0], t.shape[0]
    # local distance matrix
    diff = q[:, None, :] - t[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))

    inf = np.inf
    prev = np.empty(m)
    cur = np.empty(m)
    prev[0] = 2.0 * dist[0, 0]
    for j in range(1, m):
        prev[j] = prev[j - 1] + dist[0, j]
    for i in range(1, n):
        row = dist[i]
        cur[0] = prev[0] + row[0]
        for j in range(1, m):
            cur[j] = min(prev[j] + row[j],          # query advances
                         cur[j - 1] + row[j],       # template advances
                         prev[j - 1] + 2.0 * row[j])  # both advance
        prev, cur = cur, prev
    norm = prev / (n + np.arange(1, m + 1))
    return int(np.argmin(norm)), norm


class DTWProgressEstimator(BaseEstimator):
    """Time-progress estimation by open-end matching to an averaged template."""

    def __init__(self, template_length: int = TEMPLATE_LENGTH):
        self.template_length = template_length

    def fit(self, sequences: list[np.ndarray], y=None) -> "DTWProgressEstimator":
        """Build the template from training-trial Driving feature sequences."""
        if not sequences:
            raise ValueError("need at least one training sequence")
        resampled = np.stack([resample_sequence(s, self.template_length)
                              for s in sequences])
        self.template_raw_ = resampled.mean(axis=0)
        stacked = np.concatenate([np.atleast_2d(np.asarray(s, dtype=float))
                                  for s in sequences], axis=0)
        self.mean_ = stacked.mean(axis=0)
        self.std_ = np.maximum(stacked.std(axis=0), 1e-9)
        self.template_ = (self.template_raw_ - self.mean_) / self.std_
        return self

    def progress(self, query: np.ndarray) -> float:
        """Time-progress estimate in [0, 1] for a partial Driving sequence."""
        q = (np.atleast_2d(np.asarray(query, dtype=float)) - self.mean_) / self.std_
        j, _ = open_end_dtw(q, self.template_)
        return j / (self.template_.shape[0] - 1)

    def predict(self, sequences: list[np.ndarray]) -> np.ndarray:
        return np.array([self.progress(s) for s in sequences])
