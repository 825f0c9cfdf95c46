"""Dataset assembly, model training, structured CV and offline scoring.

Offline scoring mirrors the online pipeline semantics exactly: the detector
is rescored through the same voting-buffer pipeline used in closed loop, and
progress estimators are scored over the ground-truth Driving phase at the
deployed inference rate with held predictions in between.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import Config
from .core import (
    ManifestEntry,
    NO_PREDICTION,
    TrialLog,
    load_dataset,
    load_trial,
    resolve_trial_path,
)
from .errors import ConfigurationError
from .estimators.artifacts import manifest_sha256, save_artifact
from .estimators.detector import SubtaskDetector
from .estimators.dtw import DTWProgressEstimator
from .estimators.features import (
    ESTIMATOR_SPEC,
    detector_windows_from_log,
    estimator_channel_matrix,
    estimator_windows_from_log,
)
from .estimators.gpr import GPRProgressEstimator
from .estimators.minimum_jerk import MinimumJerkEstimator
from .estimators.pipeline import IntentPipeline
from .estimators.progress import NeuralProgressEstimator
from .evaluation import DetectionReport, RegressionReport, detection_metrics, make_folds, regression_metrics

PROGRESS_KINDS = ("cnn", "gpr", "dtw", "mj")
MODEL_KINDS = ("detector",) + PROGRESS_KINDS


def _iter_logs(dataset_dir: str, entries: list[ManifestEntry]):
    for e in entries:
        yield e, load_trial(resolve_trial_path(dataset_dir, e))


def build_detector_dataset(dataset_dir: str, entries: list[ManifestEntry],
                           stride: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for _, log in _iter_logs(dataset_dir, entries):
        x, y = detector_windows_from_log(log, stride)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def build_estimator_dataset(dataset_dir: str, entries: list[ManifestEntry],
                            stride: int, target: str) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for _, log in _iter_logs(dataset_dir, entries):
        x, y = estimator_windows_from_log(log, stride, target)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def build_driving_sequences(dataset_dir: str,
                            entries: list[ManifestEntry]) -> list[np.ndarray]:
    """Per-trial Driving feature sequences at the estimator stride (DTW input)."""
    seqs = []
    for _, log in _iter_logs(dataset_dir, entries):
        chans = estimator_channel_matrix(log.velocity, log.meta.rate)
        k_d, k_c = log.tick_of(log.meta.t_d), log.tick_of(log.meta.t_c)
        seqs.append(chans[k_d:k_c + 1:ESTIMATOR_SPEC.downsample])
    return seqs


# ---------------------------------------------------------------------------
# Offline scoring
# ---------------------------------------------------------------------------

def score_detector_on_log(log: TrialLog, detector: SubtaskDetector,
                          inference_stride: int,
                          vote_capacity: int = 100) -> tuple[np.ndarray, DetectionReport]:
    """Replay the voted detector over one log; returns per-tick voted labels."""
    pipe = IntentPipeline(detector, None, rate=log.meta.rate,
                          inference_stride=inference_stride,
                          vote_capacity=vote_capacity)
    voted = np.empty(len(log), dtype=int)
    pos, vel, f_h, f_int = log.position, log.velocity, log.f_human, log.f_int
    for k in range(len(log)):
        voted[k] = int(pipe.step(k, pos[k], vel[k], f_h[k], f_int[k]).voted)
    return voted, detection_metrics(log.subtask_true, voted, log.meta.rate)


def score_estimator_on_log(log: TrialLog, estimator, target: str,
                           inference_stride: int) -> tuple[np.ndarray, RegressionReport]:
    """Score a progress estimator over the ground-truth Driving phase.

    Predictions are computed every ``inference_stride`` ticks from windows or
    sequences keyed to the true Driving onset and held until the next update,
    matching deployed behavior with an ideal detector.
    """
    rate = log.meta.rate
    k_d, k_c = log.tick_of(log.meta.t_d), log.tick_of(log.meta.t_c)
    ticks = np.arange(k_d, k_c, inference_stride)
    truth = log.tau_true if target == "tau" else log.lambda_true

    if isinstance(estimator, (NeuralProgressEstimator, GPRProgressEstimator)):
        x, _ = estimator_windows_from_log(log, inference_stride, target)
        raw = estimator.predict(x)
    elif isinstance(estimator, DTWProgressEstimator):
        chans = estimator_channel_matrix(log.velocity, rate)
        raw = np.array([
            estimator.progress(chans[k_d:k + 1:ESTIMATOR_SPEC.downsample])
            for k in ticks])
    elif isinstance(estimator, MinimumJerkEstimator):
        from .estimators.pipeline import MJ_FIT_STRIDE
        pos = log.position
        raw = np.empty(len(ticks))
        for i, k in enumerate(ticks):
            seg = pos[k_d:k + 1:MJ_FIT_STRIDE]
            if seg.shape[0] < estimator.min_samples:
                raw[i] = NO_PREDICTION
                continue
            times = np.arange(seg.shape[0]) * (MJ_FIT_STRIDE / rate)
            tau, lam, _ = estimator.estimate(times, seg - seg[0])
            raw[i] = lam if target == "lambda" else tau
    else:
        raise ConfigurationError(f"cannot score estimator {type(estimator)}")

    # hold each prediction until the next inference tick
    preds = np.full(k_c - k_d, NO_PREDICTION)
    for i, k in enumerate(ticks):
        end = ticks[i + 1] if i + 1 < len(ticks) else k_c
        preds[k - k_d:end - k_d] = raw[i]
    return preds, regression_metrics(truth[k_d:k_c], preds)


def replay_log(log: TrialLog, detector: SubtaskDetector, estimator,
               target: str, inference_stride: int, vote_capacity: int = 100):
    """Full two-layer pipeline re-inference over a finished log.

    Returns (voted labels, raw progress column, DetectionReport,
    RegressionReport over the true Driving slice).
    """
    pipe = IntentPipeline(detector, estimator, rate=log.meta.rate,
                          inference_stride=inference_stride,
                          vote_capacity=vote_capacity, mj_target=target)
    n = len(log)
    voted = np.empty(n, dtype=int)
    progress = np.full(n, NO_PREDICTION)
    pos, vel, f_h, f_int = log.position, log.velocity, log.f_human, log.f_int
    for k in range(n):
        out = pipe.step(k, pos[k], vel[k], f_h[k], f_int[k])
        voted[k] = int(out.voted)
        if out.progress_raw is not None:
            progress[k] = out.progress_raw
    det = detection_metrics(log.subtask_true, voted, log.meta.rate)
    sl = log.driving_slice()
    truth = log.tau_true if target == "tau" else log.lambda_true
    reg = regression_metrics(truth[sl], progress[sl])
    return voted, progress, det, reg


# ---------------------------------------------------------------------------
# Training entry points
# ---------------------------------------------------------------------------

def make_model(kind: str, cfg: Config, seed: int):
    if kind == "detector":
        return SubtaskDetector(
            batch_size=cfg.get_int("train.detector_batch"),
            learning_rate=cfg.get_float("train.learning_rate"),
            lr_decay=cfg.get_float("train.lr_decay"),
            epochs=cfg.get_int("train.detector_epochs"),
            val_fraction=cfg.get_float("train.val_fraction"),
            patience=cfg.get_int("train.patience"),
            l1=cfg.get_float("train.detector_l1"),
            l2=cfg.get_float("train.detector_l2"),
            optimizer=cfg.get_str("train.optimizer"),
            seed=seed, rate=cfg.get_float("sim.rate"))
    if kind == "cnn":
        return NeuralProgressEstimator(
            batch_size=cfg.get_int("train.estimator_batch"),
            learning_rate=cfg.get_float("train.learning_rate"),
            lr_decay=cfg.get_float("train.lr_decay"),
            epochs=cfg.get_int("train.estimator_epochs"),
            val_fraction=cfg.get_float("train.val_fraction"),
            patience=cfg.get_int("train.patience"),
            l1=cfg.get_float("train.estimator_l1"),
            l2=cfg.get_float("train.estimator_l2"),
            optimizer=cfg.get_str("train.optimizer"),
            seed=seed, rate=cfg.get_float("sim.rate"))
    if kind == "gpr":
        return GPRProgressEstimator(
            max_train=cfg.get_int("train.gpr_max_windows"),
            opt_subsample=cfg.get_int("train.gpr_opt_subsample"),
            seed=seed, rate=cfg.get_float("sim.rate"))
    if kind == "dtw":
        return DTWProgressEstimator(
            template_length=cfg.get_int("train.dtw_template_length"))
    if kind == "mj":
        return MinimumJerkEstimator()
    raise ConfigurationError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")


def fit_model(kind: str, model, cfg: Config, dataset_dir: str,
              entries: list[ManifestEntry], target: str):
    det_stride = cfg.get_int("train.detector_window_stride")
    est_stride = cfg.get_int("train.estimator_window_stride")
    if kind == "detector":
        x, y = build_detector_dataset(dataset_dir, entries, det_stride)
        model.fit(x, y)
    elif kind in ("cnn", "gpr"):
        x, y = build_estimator_dataset(dataset_dir, entries, est_stride, target)
        model.fit(x, y)
    elif kind == "dtw":
        model.fit(build_driving_sequences(dataset_dir, entries))
    elif kind == "mj":
        model.fit()
    return model


@dataclass
class FoldResult:
    category: str
    value: object
    artifact_path: str
    trial_rows: list[dict]


def train_models(cfg: Config, dataset_dir: str, kind: str, target: str,
                 cv_category: str | None, out_dir: str, seed: int,
                 progress_cb=None) -> list:
    """Train one deployment model, or one model per structured CV fold.

    With CV, each fold's model is scored on its held-out trials and per-trial
    reports are returned alongside the artifact paths.
    """
    if kind not in MODEL_KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}")
    if kind == "dtw":
        target = "tau"  # open-end matching estimates time progress only
    entries = load_dataset(dataset_dir)
    if not entries:
        raise ConfigurationError(f"no valid trials in {dataset_dir}")
    os.makedirs(out_dir, exist_ok=True)
    sha = manifest_sha256(os.path.join(dataset_dir, "manifest.csv"))
    stride = cfg.get_int("pipeline.inference_stride")
    vote_capacity = cfg.get_int("schedule.vote_capacity")

    if cv_category is None:
        model = make_model(kind, cfg, seed)
        fit_model(kind, model, cfg, dataset_dir, entries, target)
        path = os.path.join(out_dir, f"{kind}.json")
        save_artifact(model, path, target=target, train_manifest=sha)
        return [FoldResult(category="none", value="all", artifact_path=path,
                           trial_rows=[])]

    folds = make_folds(entries, cv_category)
    results = []
    for fi, fold in enumerate(folds):
        model = make_model(kind, cfg, seed + fi)
        train_entries = [entries[i] for i in fold.train_indices]
        test_entries = [entries[i] for i in fold.test_indices]
        fit_model(kind, model, cfg, dataset_dir, train_entries, target)
        path = os.path.join(out_dir, f"{kind}_{cv_category}_{fold.value}.json")
        save_artifact(model, path, target=target, train_manifest=sha,
                      extra={"fold": str(fold.value), "category": cv_category})
        rows = []
        for e, log in _iter_logs(dataset_dir, test_entries):
            row = {"trial": e.path, "fold": str(fold.value), "subject": e.subject,
                   "l_p": e.l_p, "corner": e.corner, "iod": e.iod}
            if kind == "detector":
                _, rep = score_detector_on_log(log, model, stride, vote_capacity)
            else:
                _, rep = score_estimator_on_log(log, model, target, stride)
            row.update(rep.as_row())
            rows.append(row)
        results.append(FoldResult(category=cv_category, value=fold.value,
                                  artifact_path=path, trial_rows=rows))
        if progress_cb:
            progress_cb(fi + 1, len(folds))
    return results
