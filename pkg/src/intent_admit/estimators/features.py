"""Feature windows and normalization for the intent models.

The detector consumes 0.5 s windows (stride 4, 63 steps) of
(‖V‖, ‖F_int‖, ‖F_h‖); the progress estimators consume 8 s windows
(stride 32, 125 steps) of (‖V‖, ‖a‖).  Acceleration is a causal
finite difference of the velocity vector smoothed by a first-order 20 Hz
low-pass, computed identically offline and online.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import (
    DEFAULT_RATE,
    SlidingWindowSpec,
    TrialLog,
    detector_channel_matrix,
    row_magnitudes,
    window_array,
)
from ..errors import ArtifactError

ACCEL_LOWPASS_HZ = 20.0

DETECTOR_SPEC = SlidingWindowSpec(length_s=0.5, downsample=4,
                                  channels=("v_mag", "f_int_mag", "f_h_mag"))
ESTIMATOR_SPEC = SlidingWindowSpec(length_s=8.0, downsample=32,
                                   channels=("v_mag", "a_mag"))


@dataclass(frozen=True)
class FeatureSpec:
    """Input contract of a trained model; artifacts must match to be loadable."""

    kind: str            # "detector" | "estimator"
    window: SlidingWindowSpec
    rate: float = DEFAULT_RATE

    @property
    def n_steps(self) -> int:
        return self.window.n_steps(self.rate)

    @property
    def n_channels(self) -> int:
        return len(self.window.channels)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "length_s": self.window.length_s,
            "downsample": self.window.downsample,
            "channels": list(self.window.channels),
            "rate": self.rate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSpec":
        return cls(kind=d["kind"],
                   window=SlidingWindowSpec(length_s=d["length_s"],
                                            downsample=int(d["downsample"]),
                                            channels=tuple(d["channels"])),
                   rate=float(d["rate"]))

    def check_compatible(self, other: "FeatureSpec") -> None:
        if self != other:
            raise ArtifactError(
                f"feature spec mismatch: model expects {other}, pipeline provides {self}")


def detector_feature_spec(rate: float = DEFAULT_RATE) -> FeatureSpec:
    return FeatureSpec(kind="detector", window=DETECTOR_SPEC, rate=rate)


def estimator_feature_spec(rate: float = DEFAULT_RATE) -> FeatureSpec:
    return FeatureSpec(kind="estimator", window=ESTIMATOR_SPEC, rate=rate)


def lowpass_alpha(rate: float, cutoff_hz: float = ACCEL_LOWPASS_HZ) -> float:
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / rate)


def acceleration_magnitude(velocity: np.ndarray, rate: float) -> np.ndarray:
    """Causal accel magnitude: a[k] = ‖V[k] - V[k-2]‖/(2 dt), then 20 Hz low-pass.

    The difference is centered one tick back so the same value is available
    online without lookahead.
    """
    v = np.asarray(velocity, dtype=float)
    n = v.shape[0]
    a = np.zeros(n)
    if n >= 2:
        d = v[1] - v[0]
        a[1] = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2) * rate
    if n >= 3:
        d = v[2:] - v[:-2]
        a[2:] = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2) * (rate / 2.0)
    alpha = lowpass_alpha(rate)
    out = np.empty(n)
    state = 0.0
    for k in range(n):
        state += alpha * (a[k] - state)
        out[k] = state
    return out


class AccelStream:
    """Streaming twin of acceleration_magnitude for online use."""

    def __init__(self, rate: float):
        self.rate = rate
        self.alpha = lowpass_alpha(rate)
        self._prev: list[np.ndarray] = []
        self._state = 0.0
        self._count = 0

    def update(self, velocity: np.ndarray) -> float:
        if self._count == 0:
            raw = 0.0
        elif self._count == 1:
            d = velocity - self._prev[-1]
            raw = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2) * self.rate
        else:
            d = velocity - self._prev[-2]
            raw = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2) * (self.rate / 2.0)
        self._prev.append(np.asarray(velocity, dtype=float).copy())
        if len(self._prev) > 2:
            self._prev.pop(0)
        self._count += 1
        self._state += self.alpha * (raw - self._state)
        return self._state


def estimator_channel_matrix(velocity: np.ndarray, rate: float) -> np.ndarray:
    """Stack (‖V‖, ‖a‖) for a whole trial, shape (n, 2)."""
    return np.column_stack([
        row_magnitudes(np.asarray(velocity, dtype=float)),
        acceleration_magnitude(velocity, rate),
    ])


@dataclass
class Standardizer:
    """Per-channel standardization statistics, fit on training windows only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, windows: np.ndarray) -> "Standardizer":
        mean = windows.mean(axis=(0, 1))
        std = windows.std(axis=(0, 1))
        std = np.maximum(std, 1e-9)
        return cls(mean=mean, std=std)

    def apply(self, windows: np.ndarray) -> np.ndarray:
        return (windows - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(mean=np.asarray(d["mean"], dtype=float),
                   std=np.asarray(d["std"], dtype=float))


# ---------------------------------------------------------------------------
# Window dataset construction from trial logs
# ---------------------------------------------------------------------------

def detector_windows_from_log(log: TrialLog, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample (window, label) pairs over a whole trial every ``stride`` ticks."""
    rate = log.meta.rate
    chans = detector_channel_matrix(log.velocity, log.f_int, log.f_human)
    labels = log.subtask_true
    ticks = np.arange(0, len(log), stride)
    X = np.stack([window_array(chans, rate, DETECTOR_SPEC, int(k)) for k in ticks])
    return X, labels[ticks]


def estimator_windows_from_log(log: TrialLog, stride: int,
                               target: str) -> tuple[np.ndarray, np.ndarray]:
    """Sample (window, progress) pairs over the ground-truth Driving phase.

    Windows are zero-padded before the Driving onset so the model never sees
    earlier phases, matching how the online pipeline feeds it.
    """
    if target not in ("tau", "lambda"):
        raise ValueError(f"target must be tau|lambda, got {target!r}")
    rate = log.meta.rate
    chans = estimator_channel_matrix(log.velocity, rate)
    k_d = log.tick_of(log.meta.t_d)
    k_c = log.tick_of(log.meta.t_c)
    ticks = np.arange(k_d, k_c, stride)
    X = np.stack([window_array(chans, rate, ESTIMATOR_SPEC, int(k), start_tick=k_d)
                  for k in ticks])
    y = log.tau_true[ticks] if target == "tau" else log.lambda_true[ticks]
    return X, y
