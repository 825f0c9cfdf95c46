"""LSTM subtask classifier on 0.5 s magnitude windows."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..core import Subtask
from .base import validate_targets, validate_windows
from .features import FeatureSpec, Standardizer, detector_feature_spec
from .network import LSTM, Dense, Network, TrainConfig, TrainHistory, softmax, train_network


class SubtaskDetector(BaseEstimator, ClassifierMixin):
    """Sequence classifier: LSTM(hidden) -> dense(4) -> softmax.

    ``fit`` expects raw (not standardized) windows of shape (n, 63, 3); the
    standardization statistics are computed from the fit data and stored with
    the model.
    """

    def __init__(self, hidden: int = 32, batch_size: int = 128,
                 learning_rate: float = 1e-4, lr_decay: float = 0.95,
                 epochs: int = 40, val_fraction: float = 0.05, patience: int = 10,
                 l1: float = 0.0, l2: float = 0.0, optimizer: str = "adam",
                 seed: int = 0, rate: float = 500.0):
        self.hidden = hidden
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
        return detector_feature_spec(self.rate)

    def _build(self, rng: np.random.Generator) -> Network:
        spec = self.feature_spec
        return Network(
            [LSTM(spec.n_channels, self.hidden, rng), Dense(self.hidden, 4, rng)],
            loss="softmax_ce", l1=self.l1, l2=self.l2)

    def fit(self, X, y) -> "SubtaskDetector":
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        y = validate_targets(y, X.shape[0])
        self.standardizer_ = Standardizer.fit(X)
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xde7]))
        self.net_ = self._build(rng)
        cfg = TrainConfig(batch_size=self.batch_size, learning_rate=self.learning_rate,
                          lr_decay=self.lr_decay, epochs=self.epochs,
                          val_fraction=self.val_fraction, patience=self.patience,
                          l1=self.l1, l2=self.l2, optimizer=self.optimizer,
                          seed=self.seed)
        self.history_: TrainHistory = train_network(
            self.net_, self.standardizer_.apply(X), y, cfg)
        return self

    def predict_proba(self, X) -> np.ndarray:
        spec = self.feature_spec
        X = validate_windows(X, spec.n_steps, spec.n_channels)
        return softmax(self.net_.predict(self.standardizer_.apply(X)))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def predict_one(self, window: np.ndarray) -> Subtask:
        logits = self.net_.forward(self.standardizer_.apply(window[None, :, :]))
        return Subtask(int(np.argmax(logits[0])))
