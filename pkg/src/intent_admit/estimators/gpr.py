"""Exact Gaussian process regression with a Matern nu=1/2 kernel.

The kernel is the exponential ``k(r) = sigma^2 exp(-r / l)``; hyperparameters
(signal variance, length scale) are chosen by maximizing the log marginal
likelihood with L-BFGS-B in log space and randomized restarts.  The posterior
is conditioned on (at most) ``max_train`` flattened feature windows via a
Cholesky factor; hyperparameter optimization runs on a smaller subsample to
keep the cubic cost bounded.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin

from ..errors import FitFailure
from .base import validate_targets, validate_windows
from .features import FeatureSpec, Standardizer, estimator_feature_spec

JITTERS = (0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-3)


def matern12_kernel(xa: np.ndarray, xb: np.ndarray, signal_variance: float,
                    length_scale: float) -> np.ndarray:
    r = cdist(xa, xb)
    return signal_variance * np.exp(-r / length_scale)


def _chol_with_jitter(k: np.ndarray, alpha: float) -> tuple[np.ndarray, float]:
    n = k.shape[0]
    for jitter in JITTERS:
        try:
            return cholesky(k + (alpha + jitter) * np.eye(n), lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise FitFailure("kernel matrix not positive definite after jitter escalation")


def log_marginal_likelihood(x: np.ndarray, y: np.ndarray, alpha: float,
                            log_theta: np.ndarray,
                            with_grad: bool = False):
    """LML and (optionally) its gradient wrt (log sigma^2, log length scale)."""
    sig2 = math.exp(log_theta[0])
    ell = math.exp(log_theta[1])
    r = cdist(x, x)
    k = sig2 * np.exp(-r / ell)
    n = x.shape[0]
    try:
        low = cholesky(k + alpha * np.eye(n), lower=True)
    except np.linalg.LinAlgError:
        if with_grad:
            return -np.inf, np.zeros(2)
        return -np.inf
    a_vec = cho_solve((low, True), y)
    lml = -0.5 * float(y @ a_vec) - float(np.sum(np.log(np.diag(low)))) \
        - 0.5 * n * math.log(2.0 * math.pi)
    if not with_grad:
        return lml
    k_inv = cho_solve((low, True), np.eye(n))
    outer = np.outer(a_vec, a_vec) - k_inv
    dk_dlogsig = k
    with np.errstate(invalid="ignore"):
        dk_dlogell = k * (r / ell)
    dk_dlogell = np.nan_to_num(dk_dlogell)
    grad = np.array([
        0.5 * float(np.sum(outer * dk_dlogsig)),
        0.5 * float(np.sum(outer * dk_dlogell)),
    ])
    return lml, grad


class GPRProgressEstimator(BaseEstimator, RegressorMixin):
    """GP posterior over progress given flattened estimator windows."""

    def __init__(self, length_scale: float = 1.0,
                 length_scale_bounds: tuple[float, float] = (1e-20, 1e5),
                 signal_variance: float = 1.0,
                 signal_variance_bounds: tuple[float, float] = (1e-20, 1e5),
                 alpha: float = 0.5, n_restarts: int = 20,
                 max_train: int = 4000, opt_subsample: int = 600,
                 opt_maxiter: int = 30, seed: int = 0, rate: float = 500.0):
        self.length_scale = length_scale
        self.length_scale_bounds = length_scale_bounds
        self.signal_variance = signal_variance
        self.signal_variance_bounds = signal_variance_bounds
        self.alpha = alpha
        self.n_restarts = n_restarts
        self.max_train = max_train
        self.opt_subsample = opt_subsample
        self.opt_maxiter = opt_maxiter
        self.seed = seed
        self.rate = rate

    @property
    def feature_spec(self) -> FeatureSpec:
        return estimator_feature_spec(self.rate)

    def _flatten(self, X: np.ndarray) -> np.ndarray:
        return self.standardizer_.apply(X).reshape(X.shape[0], -1)

    def fit(self, X, y) -> "GPRProgressEstimator":
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        y = validate_targets(y, X.shape[0])
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0x69b]))
        if X.shape[0] > self.max_train:
            idx = np.sort(rng.choice(X.shape[0], size=self.max_train, replace=False))
            X, y = X[idx], y[idx]
        self.standardizer_ = Standardizer.fit(X)
        xf = self._flatten(X)
        self.y_mean_ = float(y.mean())
        yc = y - self.y_mean_

        # hyperparameter search on a subsample bounds the cubic LML cost
        if xf.shape[0] > self.opt_subsample:
            sub = np.sort(rng.choice(xf.shape[0], size=self.opt_subsample, replace=False))
            x_opt, y_opt = xf[sub], yc[sub]
        else:
            x_opt, y_opt = xf, yc

        lo = np.log([self.signal_variance_bounds[0], self.length_scale_bounds[0]])
        hi = np.log([self.signal_variance_bounds[1], self.length_scale_bounds[1]])
        theta0 = np.log([self.signal_variance, self.length_scale])
        starts = [theta0] + [rng.uniform(lo, hi) for _ in range(self.n_restarts)]

        self.lml_initial_ = log_marginal_likelihood(x_opt, y_opt, self.alpha, theta0)
        best_theta, best_lml = theta0, self.lml_initial_
        for start in starts:
            res = minimize(
                lambda th: tuple(-v for v in log_marginal_likelihood(
                    x_opt, y_opt, self.alpha, th, with_grad=True)),
                start, jac=True, method="L-BFGS-B",
                bounds=list(zip(lo, hi)),
                options={"maxiter": self.opt_maxiter})
            cand = res.x
            lml = log_marginal_likelihood(x_opt, y_opt, self.alpha, cand)
            if lml > best_lml:
                best_lml, best_theta = lml, cand

        self.lml_ = best_lml
        self.signal_variance_, self.length_scale_ = np.exp(best_theta)

        k = matern12_kernel(xf, xf, self.signal_variance_, self.length_scale_)
        self.chol_, self.jitter_ = _chol_with_jitter(k, self.alpha)
        self.x_train_ = xf
        self.alpha_vec_ = cho_solve((self.chol_, True), yc)
        return self

    def _posterior(self, xq: np.ndarray, with_variance: bool):
        k_star = matern12_kernel(self.x_train_, xq, self.signal_variance_,
                                 self.length_scale_)
        mean = k_star.T @ self.alpha_vec_ + self.y_mean_
        if not with_variance:
            return mean, None
        v = solve_triangular(self.chol_, k_star, lower=True)
        var = self.signal_variance_ - np.sum(v * v, axis=0)
        return mean, np.maximum(var, 0.0)

    def predict(self, X, return_std: bool = False):
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        mean, var = self._posterior(self._flatten(X), return_std)
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def predict_one(self, window: np.ndarray) -> float:
        xq = self.standardizer_.apply(window[None, :, :]).reshape(1, -1)
        mean, _ = self._posterior(xq, False)
        return float(mean[0])
