"""1-D CNN progress regressor on 8 s velocity/acceleration windows."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .base import validate_targets, validate_windows
from .features import FeatureSpec, Standardizer, estimator_feature_spec
from .network import (
    Conv1D,
    Dense,
    Flatten,
    Network,
    ReLU,
    Subsample,
    TrainConfig,
    TrainHistory,
    train_network,
)


class NeuralProgressEstimator(BaseEstimator, RegressorMixin):
    """conv(16,5) -> relu -> stride-2 -> conv(32,5) -> relu -> dense(64) -> dense(1).

    The output neuron has no activation; callers clamp to [0, 1] for control
    and keep the raw value for metrics.
    """

    def __init__(self, filters1: int = 16, filters2: int = 32, width: int = 5,
                 dense: int = 64, batch_size: int = 64, learning_rate: float = 1e-4,
                 lr_decay: float = 0.95, epochs: int = 40, val_fraction: float = 0.05,
                 patience: int = 10, l1: float = 1e-4, l2: float = 1e-4,
                 optimizer: str = "adam", seed: int = 0, rate: float = 500.0):
        self.filters1 = filters1
        self.filters2 = filters2
        self.width = width
        self.dense = dense
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.epochs = epochs
        self.val_fraction = val_fraction
        self.patience = patience
        self.l1 = l1
        self.l2 = l2
        self.optimizer = optimizer
        self.seed = seed
        self.rate = rate

    @property
    def feature_spec(self) -> FeatureSpec:
        return estimator_feature_spec(self.rate)

    def _build(self, rng: np.random.Generator) -> Network:
        spec = self.feature_spec
        t = spec.n_steps
        t1 = t - self.width + 1
        t2 = (t1 + 1) // 2 - self.width + 1
        return Network(
            [
                Conv1D(spec.n_channels, self.filters1, self.width, rng),
                ReLU(),
                Subsample(2),
                Conv1D(self.filters1, self.filters2, self.width, rng),
                ReLU(),
                Flatten(),
                Dense(t2 * self.filters2, self.dense, rng),
                ReLU(),
                Dense(self.dense, 1, rng),
            ],
            loss="mse", l1=self.l1, l2=self.l2)

    def fit(self, X, y) -> "NeuralProgressEstimator":
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        y = validate_targets(y, X.shape[0])
        self.standardizer_ = Standardizer.fit(X)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xc22]))
        self.net_ = self._build(rng)
        cfg = TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                          lr_decay=self.lr_decay, epochs=self.epochs,
                          val_fraction=self.val_fraction, patience=self.patience,
                          l1=self.l1, l2=self.l2, optimizer=self.optimizer,
                          seed=self.seed)
        self.history_: TrainHistory = train_network(
            self.net_, self.standardizer_.apply(X), y, cfg)
        return self

    def predict(self, X) -> np.ndarray:
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        return self.net_.predict(self.standardizer_.apply(X)).reshape(-1)

    def predict_one(self, window: np.ndarray) -> float:
        out = self.net_.forward(self.standardizer_.apply(window[None, :, :]))
        return float(out[0, 0])
