"""Detection, regression and task-performance metrics plus structured CV folds.

Detection metrics cover accuracy, weighted F1, concurrency (accuracy near
true transitions) and fluctuation (prediction changes per second away from
transitions).  Regression metrics cover RMSE, R², the maximum estimated
progress during Driving and the mistiming of the adaptation it would trigger.
Task metrics integrate human force, speed and effort over Driving and measure
Contact oscillation as the peak short-time spectral magnitude of high-pass
filtered tool speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.signal import butter, sosfiltfilt, spectrogram

from .core import NO_PREDICTION, TrialLog
from .errors import ConfigurationError

TRANSITION_WINDOW = 0.5       # s, half-width follows the detector window length
OSCILLATION_CUTOFF_HZ = 0.5
OSCILLATION_DF_HZ = 0.05
OSCILLATION_MAX_WINDOW_S = 4.0
BUTTERWORTH_ORDER = 4


@dataclass
class DetectionReport:
    accuracy: float
    weighted_f1: float
    concurrency: float
    fluctuation_hz: float
    confusion: np.ndarray = field(repr=False, default=None)

    def as_row(self) -> dict:
        return {"accuracy": self.accuracy, "weighted_f1": self.weighted_f1,
                "concurrency": self.concurrency, "fluctuation_hz": self.fluctuation_hz}


@dataclass
class RegressionReport:
    rmse: float
    r2: float
    max_threshold: float
    mistiming: float

    def as_row(self) -> dict:
        return {k.name: getattr(self, k.name) for k in fields(self)}


@dataclass
class TaskReport:
    f_h_ave: float        # N, Eq. mean human force over Driving
    v_ave: float          # m/s
    effort: float         # J, total human effort over Driving
    oscillation_peak: float
    oscillation_flagged: bool = False

    def as_row(self) -> dict:
        return {"f_h_ave": self.f_h_ave, "v_ave": self.v_ave, "effort": self.effort,
                "oscillation_peak": self.oscillation_peak}


def confusion_matrix(true_labels: np.ndarray, pred_labels: np.ndarray,
                     n_classes: int = 4) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (true_labels, pred_labels), 1)
    return cm


def weighted_f1(cm: np.ndarray) -> float:
    support = cm.sum(axis=1)
    total = support.sum()
    if total == 0:
        return 0.0
    score = 0.0
    for k in range(cm.shape[0]):
        tp = cm[k, k]
        fp = cm[:, k].sum() - tp
        fn = support[k] - tp
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom > 0 else 0.0
        score += support[k] * f1
    return float(score / total)


def transition_mask(true_labels: np.ndarray, rate: float,
                    half_width_s: float = TRANSITION_WINDOW) -> np.ndarray:
    """Boolean mask of ticks within ±half_width of a ground-truth transition."""
    n = len(true_labels)
    mask = np.zeros(n, dtype=bool)
    w = int(round(half_width_s * rate))
    changes = np.nonzero(np.diff(true_labels) != 0)[0] + 1
    for c in changes:
        mask[max(0, c - w):min(n, c + w + 1)] = True
    return mask


def detection_metrics(true_labels: np.ndarray, pred_labels: np.ndarray, rate: float,
                      half_width_s: float = TRANSITION_WINDOW) -> DetectionReport:
    true_labels = np.asarray(true_labels, dtype=int)
    pred_labels = np.asarray(pred_labels, dtype=int)
    if true_labels.shape != pred_labels.shape:
        raise ValueError("label sequences must have equal length")
    n = len(true_labels)
    correct = true_labels == pred_labels
    accuracy = float(np.mean(correct)) if n else 0.0

    mask = transition_mask(true_labels, rate, half_width_s)
    concurrency = float(np.mean(correct[mask])) if mask.any() else 1.0

    outside = ~mask
    # a change counts when consecutive ticks are both outside transition windows
    both_outside = outside[1:] & outside[:-1]
    changes = (pred_labels[1:] != pred_labels[:-1]) & both_outside
    outside_seconds = float(np.sum(outside)) / rate
    fluctuation = float(np.sum(changes)) / outside_seconds if outside_seconds > 0 else 0.0

    cm = confusion_matrix(true_labels, pred_labels)
    return DetectionReport(accuracy=accuracy, weighted_f1=weighted_f1(cm),
                           concurrency=concurrency, fluctuation_hz=fluctuation,
                           confusion=cm)


def regression_metrics(true_progress: np.ndarray, pred_progress: np.ndarray,
                       rate: float | None = None) -> RegressionReport:
    """Metrics over the Driving ticks of one trial.

    ``pred_progress`` may contain NO_PREDICTION sentinels for ticks before the
    estimator produced anything; these read as 0 (progress starts at 0).
    """
    y = np.asarray(true_progress, dtype=float)
    p = np.asarray(pred_progress, dtype=float).copy()
    if y.shape != p.shape:
        raise ValueError("progress sequences must have equal length")
    p[p == NO_PREDICTION] = 0.0
    err = p - y
    rmse = float(np.sqrt(np.mean(err ** 2)))
    ss_res = float(np.sum(err ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else -math.inf)

    theta_max = float(np.max(p)) if len(p) else 0.0
    fire = np.nonzero(p >= theta_max)[0]
    t_fire = int(fire[0]) if len(fire) else len(p) - 1
    mistiming = float(y[t_fire] - theta_max)
    return RegressionReport(rmse=rmse, r2=r2, max_threshold=theta_max,
                            mistiming=mistiming)


def oscillation_peak(speed: np.ndarray, rate: float) -> tuple[float, bool]:
    """Peak short-time spectral magnitude of detrended ‖V‖ during Contact.

    Zero-phase order-4 Butterworth high-pass at 0.5 Hz, then a Hann-window
    spectrogram with 75 % overlap zero-padded to a 0.05 Hz bin spacing.
    Returns (peak, flagged) where flagged marks a Contact shorter than one
    full spectrogram window (a single zero-padded frame is used).
    """
    x = np.asarray(speed, dtype=float)
    if len(x) < 2:
        return 0.0, True
    sos = butter(BUTTERWORTH_ORDER, OSCILLATION_CUTOFF_HZ, btype="highpass",
                 fs=rate, output="sos")
    padlen = min(3 * (2 * BUTTERWORTH_ORDER + 1), len(x) - 1)
    detrended = sosfiltfilt(sos, x, padlen=padlen)

    nominal = int(round(OSCILLATION_MAX_WINDOW_S * rate))
    flagged = len(x) < nominal
    nperseg = min(len(x), nominal)
    nfft = max(int(round(rate / OSCILLATION_DF_HZ)), nperseg)
    _, _, mags = spectrogram(detrended, fs=rate, window="hann", nperseg=nperseg,
                             noverlap=int(0.75 * nperseg), nfft=nfft,
                             detrend=False, mode="magnitude")
    return float(mags.max()), flagged


def task_metrics(log: TrialLog) -> TaskReport:
    m = log.meta
    if math.isnan(m.t_d) or math.isnan(m.t_c) or math.isnan(m.t_f):
        raise ValueError("task metrics need recorded t_d, t_c and t_f")
    rate = m.rate
    k_d, k_c = log.tick_of(m.t_d), log.tick_of(m.t_c)
    t_span = (k_c - k_d) / rate
    f_mag = np.linalg.norm(log.f_human[k_d:k_c + 1], axis=1)
    v_mag = np.linalg.norm(log.velocity[k_d:k_c + 1], axis=1)
    dt = 1.0 / rate
    f_h_ave = float(np.trapezoid(f_mag, dx=dt)) / t_span
    v_ave = float(np.trapezoid(v_mag, dx=dt)) / t_span
    effort = float(np.trapezoid(f_mag * v_mag, dx=dt))

    contact_speed = log.speed()[k_c:log.tick_of(m.t_f) + 1]
    peak, flagged = oscillation_peak(contact_speed, rate)
    return TaskReport(f_h_ave=f_h_ave, v_ave=v_ave, effort=effort,
                      oscillation_peak=peak, oscillation_flagged=flagged)


# ---------------------------------------------------------------------------
# Structured k-fold cross validation
# ---------------------------------------------------------------------------

@dataclass
class Fold:
    category: str
    value: object
    test_indices: list[int]
    train_indices: list[int]


def make_folds(entries, category: str) -> list[Fold]:
    """One fold per distinct value of the category; that value tests, the rest train."""
    values = sorted({e.category_value(category) for e in entries}, key=str)
    if len(values) < 2:
        raise ConfigurationError(
            f"category {category!r} has {len(values)} distinct value(s); need >= 2")
    folds = []
    for v in values:
        test = [i for i, e in enumerate(entries) if e.category_value(category) == v]
        train = [i for i, e in enumerate(entries) if e.category_value(category) != v]
        folds.append(Fold(category=category, value=v, test_indices=test,
                          train_indices=train))
    return folds


def aggregate(rows: list[dict], group_key: str | None = None) -> list[dict]:
    """Median/quartile/min/max summaries per metric, optionally grouped.

    ``rows`` are flat dicts of numeric metrics (plus optional grouping keys).
    """
    if not rows:
        raise ValueError("nothing to aggregate")
    groups: dict[object, list[dict]] = {}
    for row in rows:
        key = row.get(group_key) if group_key else "all"
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=str):
        members = groups[key]
        metrics = [k for k, v in members[0].items()
                   if isinstance(v, (int, float)) and not isinstance(v, bool)]
        for metric in metrics:
            vals = np.array([r[metric] for r in members if metric in r], dtype=float)
            vals = vals[np.isfinite(vals)]
            if len(vals) == 0:
                continue
            out.append({
                "group": key,
                "metric": metric,
                "count": int(len(vals)),
                "median": float(np.median(vals)),
                "q1": float(np.percentile(vals, 25)),
                "q3": float(np.percentile(vals, 75)),
                "min": float(np.min(vals)),
                "max": float(np.max(vals)),
            })
    return out
