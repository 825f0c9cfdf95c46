"""Online two-layer intent inference: detector + voting + progress estimation.

One pipeline instance serves one trial.  Inference runs at a decimated rate
(every ``inference_stride`` ticks, 50 Hz by default) with the latest result
held in between; the held detector class is pushed into the voting buffer on
every tick.  The progress estimator activates at the first tick the voted
subtask becomes Driving and stays keyed to that onset.  Nothing here looks
ahead: every output at tick k is a function of samples up to and including k.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from ..controller import VotingBuffer
from ..core import Subtask, magnitude
from .detector import SubtaskDetector
from .dtw import DTWProgressEstimator
from .features import AccelStream, DETECTOR_SPEC, ESTIMATOR_SPEC
from .gpr import GPRProgressEstimator
from .minimum_jerk import MinimumJerkEstimator
from .progress import NeuralProgressEstimator

MJ_FIT_STRIDE = 10  # fit the minimum-jerk model on 50 Hz samples


class _GrowBuffer:
    """Append-only float buffer with capacity doubling."""

    def __init__(self, n_channels: int, capacity: int = 4096):
        self._data = np.zeros((capacity, n_channels))
        self.n = 0

    def append(self, row) -> None:
        if self.n == self._data.shape[0]:
            grown = np.zeros((self._data.shape[0] * 2, self._data.shape[1]))
            grown[:self.n] = self._data
            self._data = grown
        self._data[self.n] = row
        self.n += 1

    def view(self) -> np.ndarray:
        return self._data[:self.n]


def _end_anchored_window(buf: _GrowBuffer, end_tick: int, stride: int,
                         n_steps: int, start_tick: int = 0) -> np.ndarray:
    out = np.zeros((n_steps, buf._data.shape[1]))
    idx = end_tick - stride * np.arange(n_steps - 1, -1, -1)
    valid = idx >= start_tick
    out[valid] = buf._data[idx[valid]]
    return out


@dataclass
class PipelineOutput:
    voted: Subtask
    raw_class: Subtask
    progress_raw: float | None     # held raw estimate; None before any
    progress_clamped: float | None  # in [0,1], only while voted Driving
    estimator_active: bool


class IntentPipeline:
    """Feeds per-tick signals through the detector and progress estimator."""

    def __init__(self, detector: SubtaskDetector, estimator=None,
                 rate: float = 500.0, inference_stride: int = 10,
                 vote_capacity: int = 100, audit: bool = False,
                 mj_target: str = "tau"):
        self.detector = detector
        self.estimator = estimator
        self.rate = rate
        self.stride = inference_stride
        self.vote_capacity = vote_capacity
        self.audit = audit
        self.mj_target = mj_target
        self.audit_records: list[tuple[int, str]] = []
        self.reset()

    def reset(self) -> None:
        self._votes = VotingBuffer(self.vote_capacity, fill=Subtask.IDLE)
        self._det_buf = _GrowBuffer(3)
        self._est_buf = _GrowBuffer(2)
        self._pos_buf = _GrowBuffer(3)
        self._accel = AccelStream(self.rate)
        self._raw_class = Subtask.IDLE
        self._progress_raw: float | None = None
        self._onset: int | None = None
        self._det_steps = DETECTOR_SPEC.n_steps(self.rate)
        self._est_steps = ESTIMATOR_SPEC.n_steps(self.rate)
        self.audit_records = []

    def _record_audit(self, tick: int, window: np.ndarray) -> None:
        digest = hashlib.sha1(np.ascontiguousarray(window).tobytes()).hexdigest()
        self.audit_records.append((tick, digest))

    def _estimate(self, tick: int) -> float | None:
        est = self.estimator
        onset = self._onset
        if est is None or onset is None:
            return None
        if isinstance(est, (NeuralProgressEstimator, GPRProgressEstimator)):
            win = _end_anchored_window(self._est_buf, tick, ESTIMATOR_SPEC.downsample,
                                       self._est_steps, start_tick=onset)
            if self.audit:
                self._record_audit(tick, win)
            return est.predict_one(win)
        if isinstance(est, DTWProgressEstimator):
            seq = self._est_buf._data[onset:tick + 1:ESTIMATOR_SPEC.downsample]
            return est.progress(seq)
        if isinstance(est, MinimumJerkEstimator):
            pos = self._pos_buf._data[onset:tick + 1:MJ_FIT_STRIDE]
            if pos.shape[0] < est.min_samples:
                return None
            times = np.arange(pos.shape[0]) * (MJ_FIT_STRIDE / self.rate)
            tau, lam, _ = est.estimate(times, pos - pos[0])
            return lam if self.mj_target == "lambda" else tau
        raise TypeError(f"unsupported estimator type {type(est)}")

    def step(self, tick: int, position: np.ndarray, velocity: np.ndarray,
             f_h: np.ndarray, f_int: np.ndarray) -> PipelineOutput:
        v_mag = magnitude(velocity)
        a_mag = self._accel.update(velocity)
        self._det_buf.append((v_mag, magnitude(f_int), magnitude(f_h)))
        self._est_buf.append((v_mag, a_mag))
        self._pos_buf.append(position)

        run_inference = tick % self.stride == 0
        if run_inference:
            win = _end_anchored_window(self._det_buf, tick, DETECTOR_SPEC.downsample,
                                       self._det_steps)
            if self.audit:
                self._record_audit(tick, win)
            self._raw_class = self.detector.predict_one(win)

        voted = self._votes.vote(self._raw_class)

        active = voted == Subtask.DRIVING and self.estimator is not None
        if active and self._onset is None:
            self._onset = tick
            run_inference = True  # estimate immediately at activation
        if active and run_inference:
            pred = self._estimate(tick)
            if pred is not None:
                self._progress_raw = pred

        clamped = None
        if active and self._progress_raw is not None:
            clamped = min(max(self._progress_raw, 0.0), 1.0)
        return PipelineOutput(voted=voted, raw_class=self._raw_class,
                              progress_raw=self._progress_raw,
                              progress_clamped=clamped,
                              estimator_active=active)
