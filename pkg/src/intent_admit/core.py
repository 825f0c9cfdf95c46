"""Shared domain types: fixed-rate signals, sliding windows, trial logs.

All signals are sampled at a fixed control rate (500 Hz by default) and
expressed in SI units (m, s, N).  Trial logs are written as UTF-8 CSV with a
``# key = value`` metadata header; floats are serialized with ``repr`` so a
round trip through disk is bit-exact.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, LogFormatError

DEFAULT_RATE = 500.0


class Subtask(IntEnum):
    """Task phases in order; later phases never precede earlier ones."""

    IDLE = 0
    TOOL_ATTACHMENT = 1
    DRIVING = 2
    CONTACT = 3


def vec3(x: float, y: float, z: float) -> np.ndarray:
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector components: {v}")
    return v


def magnitude(v: np.ndarray) -> float:
    return float(np.sqrt(float(v[0]) ** 2 + float(v[1]) ** 2 + float(v[2]) ** 2))


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled multi-channel signal.

    ``values`` has shape (n_samples, n_channels); sample k is at
    ``start_time + k / rate``.
    """

    rate: float
    values: np.ndarray
    start_time: float = 0.0
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rate <= 0:
            raise ConfigurationError(f"rate must be positive, got {self.rate}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.size and not np.all(np.isfinite(v)):
            raise ValueError("TimeSeries values must be finite")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.rate

    def time_of(self, tick: int) -> float:
        return self.start_time + tick / self.rate


@dataclass(frozen=True)
class SlidingWindowSpec:
    """Fixed-length look-back window with an integer subsampling stride.

    The window ends at the query tick and always includes it; earlier
    samples are taken every ``downsample`` ticks.  Ticks before the start of
    the series contribute zeros, so the output shape is constant from tick 0.
    """

    length_s: float
    downsample: int
    channels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.length_s <= 0:
            raise ConfigurationError(f"window length must be positive, got {self.length_s}")
        if int(self.downsample) != self.downsample or self.downsample < 1:
            raise ConfigurationError(f"downsample must be a positive integer, got {self.downsample}")

    def n_steps(self, rate: float) -> int:
        # ceil so 0.5 s / stride 4 -> 63 steps and 8 s / stride 32 -> 125 steps at 500 Hz
        return int(math.ceil(self.length_s * rate / self.downsample))


def window(series: TimeSeries, spec: SlidingWindowSpec, end_tick: int) -> np.ndarray:
    """Extract the subsampled look-back window ending at ``end_tick``.

    Returns an array of shape (spec.n_steps(rate), n_channels).  Rows that
    would fall before tick 0 are zero.
    """
    n = len(series)
    if end_tick < 0 or end_tick >= n:
        raise IndexError(f"end_tick {end_tick} outside series of length {n}")
    steps = spec.n_steps(series.rate)
    out = np.zeros((steps, series.values.shape[1]), dtype=float)
    # most recent sample is always included; earlier rows step back by `downsample`
    idx = end_tick - spec.downsample * np.arange(steps - 1, -1, -1)
    valid = idx >= 0
    out[valid] = series.values[idx[valid]]
    return out


def window_array(values: np.ndarray, rate: float, spec: SlidingWindowSpec,
                 end_tick: int, start_tick: int = 0) -> np.ndarray:
    """Window extraction on a bare array; ticks before ``start_tick`` read as zero.

    ``start_tick`` marks where the usable history begins (e.g. the onset of
    the Driving phase for progress-estimator inputs).
    """
    n = values.shape[0]
    if end_tick < 0 or end_tick >= n:
        raise IndexError(f"end_tick {end_tick} outside array of length {n}")
    steps = spec.n_steps(rate)
    out = np.zeros((steps, values.shape[1]), dtype=float)
    idx = end_tick - spec.downsample * np.arange(steps - 1, -1, -1)
    valid = idx >= start_tick
    out[valid] = values[idx[valid]]
    return out


# ---------------------------------------------------------------------------
# Trial logs
# ---------------------------------------------------------------------------

TRIAL_COLUMNS = (
    "t",
    "px", "py", "pz",
    "vx", "vy", "vz",
    "fhx", "fhy", "fhz",
    "fex", "fey", "fez",
    "fix", "fiy", "fiz",
    "b",
    "subtask_true", "subtask_pred",
    "tau_true", "lambda_true", "progress_pred",
)

# progress_pred uses -1.0 while no estimate has been produced yet
NO_PREDICTION = -1.0


@dataclass
class TrialMeta:
    """Per-trial condition metadata and event timestamps (seconds)."""

    subject: str = "s0"
    l_p: float = 0.18
    corner: int = 0
    iod: int = 4
    controller: str = "C2"
    repetition: int = 0
    seed: int = 0
    rate: float = DEFAULT_RATE
    target_diameter: float = 0.0
    target_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    t_g: float = float("nan")
    t_d: float = float("nan")
    t_c: float = float("nan")
    t_a: float = float("nan")
    t_f: float = float("nan")
    valid: bool = True
    miss: bool = False
    stale_frac: float = 0.0
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)


@dataclass
class TrialLog:
    """Complete per-tick record of one trial plus its condition metadata."""

    meta: TrialMeta
    data: np.ndarray  # shape (n_ticks, len(TRIAL_COLUMNS))

    def __post_init__(self):
        d = np.asarray(self.data, dtype=float)
        if d.ndim != 2 or d.shape[1] != len(TRIAL_COLUMNS):
            raise LogFormatError(
                f"trial data must have {len(TRIAL_COLUMNS)} columns, got shape {d.shape}")
        self.data = d

    def __len__(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRIAL_COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def position(self) -> np.ndarray:
        return self.data[:, 1:4]

    @property
    def velocity(self) -> np.ndarray:
        return self.data[:, 4:7]

    @property
    def f_human(self) -> np.ndarray:
        return self.data[:, 7:10]

    @property
    def f_env(self) -> np.ndarray:
        return self.data[:, 10:13]

    @property
    def f_int(self) -> np.ndarray:
        return self.data[:, 13:16]

    @property
    def damping(self) -> np.ndarray:
        return self.data[:, 16]

    @property
    def subtask_true(self) -> np.ndarray:
        return self.data[:, 17].astype(int)

    @property
    def subtask_pred(self) -> np.ndarray:
        return self.data[:, 18].astype(int)

    @property
    def tau_true(self) -> np.ndarray:
        return self.data[:, 19]

    @property
    def lambda_true(self) -> np.ndarray:
        return self.data[:, 20]

    @property
    def progress_pred(self) -> np.ndarray:
        return self.data[:, 21]

    def tick_of(self, time_s: float) -> int:
        return int(round(time_s * self.meta.rate))

    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.velocity, axis=1)

    def driving_slice(self) -> slice:
        """Ticks with ground-truth Driving label, [t_d, t_c)."""
        return slice(self.tick_of(self.meta.t_d), self.tick_of(self.meta.t_c))

    def contact_slice(self) -> slice:
        return slice(self.tick_of(self.meta.t_c), len(self))


def magnitude_channels(log: TrialLog, tick: int) -> tuple[float, float, float]:
    """(‖V‖, ‖F_int‖, ‖F_h‖) at one tick; the subtask-detector input channels."""
    return (
        magnitude(log.velocity[tick]),
        magnitude(log.f_int[tick]),
        magnitude(log.f_human[tick]),
    )


def row_magnitudes(v: np.ndarray) -> np.ndarray:
    """Per-row Euclidean norms via the explicit sum of squares.

    Matches the scalar ``magnitude`` bit for bit, which keeps offline feature
    extraction identical to the streaming pipeline.
    """
    return np.sqrt(v[:, 0] ** 2 + v[:, 1] ** 2 + v[:, 2] ** 2)


def detector_channel_matrix(velocity: np.ndarray, f_int: np.ndarray,
                            f_human: np.ndarray) -> np.ndarray:
    """Stack (‖V‖, ‖F_int‖, ‖F_h‖) for a whole trial, shape (n, 3)."""
    return np.column_stack([
        row_magnitudes(velocity),
        row_magnitudes(f_int),
        row_magnitudes(f_human),
    ])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_META_FLOATS = ("l_p", "rate", "target_diameter", "t_g", "t_d", "t_c", "t_a",
                "t_f", "stale_frac")
_META_INTS = ("corner", "iod", "repetition", "seed")
_META_BOOLS = ("valid", "miss")


def _fmt(x: float) -> str:
    return repr(float(x))


def save_trial(log: TrialLog, path: str) -> None:
    m = log.meta
    lines = []
    kv = {
        "subject": m.subject,
        "l_p": _fmt(m.l_p),
        "corner": str(m.corner),
        "iod": str(m.iod),
        "controller": m.controller,
        "repetition": str(m.repetition),
        "seed": str(m.seed),
        "rate": _fmt(m.rate),
        "target_diameter": _fmt(m.target_diameter),
        "target_center": ",".join(_fmt(c) for c in m.target_center),
        "t_g": _fmt(m.t_g),
        "t_d": _fmt(m.t_d),
        "t_c": _fmt(m.t_c),
        "t_a": _fmt(m.t_a),
        "t_f": _fmt(m.t_f),
        "valid": str(m.valid),
        "miss": str(m.miss),
        "stale_frac": _fmt(m.stale_frac),
        "flags": ";".join(m.flags),
    }
    for k, v in m.extra.items():
        kv[f"x_{k}"] = str(v)
    for k, v in kv.items():
        lines.append(f"# {k} = {v}")
    lines.append(",".join(TRIAL_COLUMNS))
    ncols = len(TRIAL_COLUMNS)
    for row in log.data:
        lines.append(",".join(_fmt(row[i]) for i in range(ncols)))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        f.write("\n")
    os.replace(tmp, path)


def load_trial(path: str) -> TrialLog:
    meta_kv: dict[str, str] = {}
    header = None
    with open(path, "r", encoding="utf-8") as f:
        n_skip = 0
        for line in f:
            n_skip += 1
            line = line.strip()
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta_kv[k.strip()] = v.strip()
            else:
                header = line
                break
        if header is None:
            raise LogFormatError(f"{path}: no column header found")
        cols = tuple(header.split(","))
        missing = [c for c in TRIAL_COLUMNS if c not in cols]
        if missing:
            raise LogFormatError(f"{path}: missing columns {missing}")
        if cols != TRIAL_COLUMNS:
            raise LogFormatError(f"{path}: unexpected column order {cols}")
        data = np.loadtxt(f, delimiter=",", ndmin=2, dtype=float)
    if data.size == 0:
        data = data.reshape(0, len(TRIAL_COLUMNS))
    if data.shape[1] != len(TRIAL_COLUMNS):
        raise LogFormatError(f"{path}: expected {len(TRIAL_COLUMNS)} columns, got {data.shape[1]}")

    meta = TrialMeta()
    extra = {}
    for k, v in meta_kv.items():
        if k == "subject":
            meta.subject = v
        elif k == "controller":
            meta.controller = v
        elif k == "target_center":
            meta.target_center = tuple(float(x) for x in v.split(","))
        elif k == "flags":
            meta.flags = tuple(x for x in v.split(";") if x)
        elif k in _META_FLOATS:
            setattr(meta, k, float(v))
        elif k in _META_INTS:
            setattr(meta, k, int(v))
        elif k in _META_BOOLS:
            setattr(meta, k, v == "True")
        elif k.startswith("x_"):
            extra[k[2:]] = v
        else:
            extra[k] = v
    meta.extra = extra
    return TrialLog(meta=meta, data=data)


def check_log_invariants(log: TrialLog, atol: float = 0.0) -> None:
    """Raise if a log violates the per-tick contracts.

    Checks F_int = F_h + F_env (exact by default), monotone ground-truth
    labels, and event ordering t_d < t_c <= t_f.
    """
    resid = log.f_int - (log.f_human + log.f_env)
    if log.data.shape[0] and float(np.max(np.abs(resid))) > atol:
        raise LogFormatError("F_int != F_h + F_env")
    labels = log.subtask_true
    if labels.size and np.any(np.diff(labels) < 0):
        raise LogFormatError("ground-truth subtask labels decrease within trial")
    m = log.meta
    if not (math.isnan(m.t_d) or math.isnan(m.t_c)):
        if not (m.t_d < m.t_c):
            raise LogFormatError(f"t_d={m.t_d} !< t_c={m.t_c}")
    if not (math.isnan(m.t_c) or math.isnan(m.t_f)):
        if not (m.t_c <= m.t_f):
            raise LogFormatError(f"t_c={m.t_c} !<= t_f={m.t_f}")


# ---------------------------------------------------------------------------
# Dataset manifests
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.csv"
_MANIFEST_COLS = ("path", "subject", "l_p", "corner", "iod", "controller",
                  "repetition", "seed", "valid", "t_d", "t_c", "t_a", "t_f")


@dataclass
class ManifestEntry:
    path: str
    subject: str
    l_p: float
    corner: int
    iod: int
    controller: str
    repetition: int
    seed: int
    valid: bool
    t_d: float
    t_c: float
    t_a: float
    t_f: float

    @classmethod
    def from_log(cls, log: TrialLog, path: str) -> "ManifestEntry":
        m = log.meta
        return cls(path=path, subject=m.subject, l_p=m.l_p, corner=m.corner,
                   iod=m.iod, controller=m.controller, repetition=m.repetition,
                   seed=m.seed, valid=m.valid, t_d=m.t_d, t_c=m.t_c,
                   t_a=m.t_a, t_f=m.t_f)

    def category_value(self, category: str):
        if category == "subject":
            return self.subject
        if category == "distance":
            return self.l_p
        if category == "corner":
            return self.corner
        if category == "iod":
            return self.iod
        raise ConfigurationError(f"unknown fold category {category!r}")


def save_manifest(entries: Sequence[ManifestEntry], dataset_dir: str) -> str:
    path = os.path.join(dataset_dir, MANIFEST_NAME)
    lines = [",".join(_MANIFEST_COLS)]
    for e in entries:
        lines.append(",".join([
            e.path, e.subject, _fmt(e.l_p), str(e.corner), str(e.iod),
            e.controller, str(e.repetition), str(e.seed), str(e.valid),
            _fmt(e.t_d), _fmt(e.t_c), _fmt(e.t_a), _fmt(e.t_f),
        ]))
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines))
        f.write("\n")
    os.replace(tmp, path)
    return path


def load_manifest(dataset_dir: str) -> list[ManifestEntry]:
    path = os.path.join(dataset_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise LogFormatError(f"no {MANIFEST_NAME} in {dataset_dir}")
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        if tuple(header.split(",")) != _MANIFEST_COLS:
            raise LogFormatError(f"{path}: bad manifest header")
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            entries.append(ManifestEntry(
                path=parts[0], subject=parts[1], l_p=float(parts[2]),
                corner=int(parts[3]), iod=int(parts[4]), controller=parts[5],
                repetition=int(parts[6]), seed=int(parts[7]),
                valid=parts[8] == "True", t_d=float(parts[9]),
                t_c=float(parts[10]), t_a=float(parts[11]), t_f=float(parts[12]),
            ))
    return entries


def load_dataset(dataset_dir: str, valid_only: bool = True) -> list[ManifestEntry]:
    entries = load_manifest(dataset_dir)
    if valid_only:
        entries = [e for e in entries if e.valid]
    return entries


def resolve_trial_path(dataset_dir: str, entry: ManifestEntry) -> str:
    p = entry.path
    return p if os.path.isabs(p) else os.path.join(dataset_dir, p)
