"""Minimum-jerk progress estimation by nonlinear least squares.

The model assumes each axis follows the classic quintic profile
``p(t) = p_f (10 s^3 - 15 s^4 + 6 s^5)`` with ``s = t / T_d``; fitting the
observed partial Driving trajectory yields the final displacement ``p_f`` per
axis and the shared duration ``T_d``, from which time and trajectory progress
follow.  No training phase: the fit runs fresh at every query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator

MIN_SAMPLES = 10


def minimum_jerk_position(t_rel: np.ndarray | float, p_f: np.ndarray,
                          t_d: float) -> np.ndarray:
    """Evaluate the quintic profile; scalar or vector ``p_f`` broadcast over time."""
    s = np.asarray(t_rel, dtype=float) / t_d
    shape = 10.0 * s ** 3 - 15.0 * s ** 4 + 6.0 * s ** 5
    return np.multiply.outer(shape, np.asarray(p_f, dtype=float))


@dataclass
class MJFit:
    p_f: np.ndarray      # per-axis final displacement, m
    t_d: float           # estimated Driving duration, s
    converged: bool
    cost: float = 0.0


def fit_minimum_jerk(times: np.ndarray, displacements: np.ndarray) -> MJFit:
    """Least-squares fit of (p_f, T_d) to an observed partial trajectory.

    ``times`` are seconds since Driving onset; ``displacements`` are positions
    relative to the onset position, shape (n, 3).
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(displacements, dtype=float)
    if t.ndim != 1 or d.shape != (t.shape[0], 3):
        raise ValueError(f"bad fit inputs: times {t.shape}, displacements {d.shape}")
    if t.shape[0] < MIN_SAMPLES:
        raise ValueError(f"need >= {MIN_SAMPLES} samples, got {t.shape[0]}")
    elapsed = float(t[-1])
    if elapsed <= 0:
        raise ValueError("elapsed time must be positive")

    t0 = elapsed * 1.6
    shape0 = 10.0 * (elapsed / t0) ** 3 - 15.0 * (elapsed / t0) ** 4 + 6.0 * (elapsed / t0) ** 5
    p0 = d[-1] / max(shape0, 0.05)

    def residuals(theta):
        pf = theta[:3]
        td = theta[3]
        model = minimum_jerk_position(t, pf, td)
        return (model - d).ravel()

    try:
        res = least_squares(
            residuals, x0=np.concatenate([p0, [t0]]),
            bounds=(np.array([-np.inf, -np.inf, -np.inf, elapsed * 1.0001]),
                    np.array([np.inf, np.inf, np.inf, 120.0])),
            method="trf", max_nfev=200)
        ok = bool(res.success) and math.isfinite(res.cost)
        return MJFit(p_f=res.x[:3], t_d=float(res.x[3]), converged=ok,
                     cost=float(res.cost))
    except Exception:
        return MJFit(p_f=p0, t_d=t0, converged=False, cost=math.inf)


class MinimumJerkEstimator(BaseEstimator):
    """Training-free progress estimator; ``estimate`` is the whole interface.

    On fit divergence the previous valid estimate is returned and flagged.
    """

    def __init__(self, min_samples: int = MIN_SAMPLES):
        self.min_samples = min_samples

    def fit(self, X=None, y=None) -> "MinimumJerkEstimator":
        return self  # nothing to learn

    def estimate(self, times: np.ndarray, displacements: np.ndarray,
                 path_length: float | None = None) -> tuple[float, float, MJFit]:
        """Return (tau_hat, lambda_hat, fit) for the observed partial trajectory.

        ``path_length`` is the traveled arc length so far; when omitted it is
        computed from the displacement samples.
        """
        fit = fit_minimum_jerk(times, displacements)
        if not fit.converged and getattr(self, "last_fit_", None) is not None:
            fit = MJFit(p_f=self.last_fit_.p_f, t_d=self.last_fit_.t_d,
                        converged=False, cost=fit.cost)
        else:
            self.last_fit_ = fit
        elapsed = float(times[-1])
        tau = min(max(elapsed / fit.t_d, 0.0), 1.0)
        if path_length is None:
            path_length = float(np.sum(np.linalg.norm(np.diff(displacements, axis=0), axis=1)))
        total = float(np.linalg.norm(fit.p_f))
        lam = min(max(path_length / total, 0.0), 1.0) if total > 0 else 0.0
        return tau, lam, fit
