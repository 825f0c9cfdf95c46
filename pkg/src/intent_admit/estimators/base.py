"""Validation helpers shared by the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def validate_windows(x, n_steps: int, n_channels: int, name: str = "X") -> np.ndarray:
    """Check a (n, n_steps, n_channels) window batch; accepts a single window too."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[1] != n_steps or x.shape[2] != n_channels:
        raise ValueError(
            f"{name} must have shape (n, {n_steps}, {n_channels}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def validate_targets(y, n: int, name: str = "y") -> np.ndarray:
    y = check_array(y, ensure_2d=False, dtype=float)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"{name} must be 1-d with {n} entries, got shape {y.shape}")
    return y
