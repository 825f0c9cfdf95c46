"""Virtual-time trial execution: data generation and closed-loop runs.

Experiment A runs the full trial lifecycle with hard-coded (ground-truth)
subtask adaptation and writes the training dataset.  Experiment B replays the
same lifecycle with the trained detector + voting buffer always active, the
progress estimator active during voted Driving, and one of the three
controllers C1/C2/C3 scheduling the damping.  Everything runs as fast as
possible on simulated clocks; a fixed seed reproduces datasets bit for bit.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .controller import DampingSchedule, DampingScheduler
from .core import (
    NO_PREDICTION,
    ManifestEntry,
    Subtask,
    TrialLog,
    TrialMeta,
    TRIAL_COLUMNS,
    save_manifest,
    save_trial,
)
from .environment import (
    SpringWorkpiece,
    TaskGeometry,
    TrialLifecycle,
    TrialPhase,
    trajectory_progress,
)
from .errors import ConfigurationError, DegenerateTrialError, DynamicsFault
from .estimators.pipeline import IntentPipeline
from .human import SubjectProfile, SyntheticHuman, sample_profiles
from .config import Config


def trial_seed(base: int, *parts: int) -> int:
    return int(np.random.SeedSequence([base, *parts]).generate_state(1)[0])


@dataclass
class SimParams:
    rate: float = 500.0
    mass: float = 50.0
    spring_stiffness: float = 8000.0
    required_depth: float = 0.004
    square_side: float = 0.15
    hold_duration: float = 3.0
    max_trial_duration: float = 30.0
    min_driving_duration: float = 0.5
    saturation: float = 60.0
    push_margin: float = 0.0015
    inference_stride: int = 10
    vote_capacity: int = 100
    schedule: DampingSchedule = field(default_factory=DampingSchedule)

    @classmethod
    def from_config(cls, cfg: Config) -> "SimParams":
        return cls(
            rate=cfg.get_float("sim.rate"),
            mass=cfg.get_float("sim.mass"),
            spring_stiffness=cfg.get_float("sim.spring_stiffness"),
            required_depth=cfg.get_float("sim.required_depth"),
            square_side=cfg.get_float("sim.square_side"),
            hold_duration=cfg.get_float("sim.hold_duration"),
            max_trial_duration=cfg.get_float("sim.max_trial_duration"),
            min_driving_duration=cfg.get_float("sim.min_driving_duration"),
            saturation=cfg.get_float("human.saturation"),
            push_margin=cfg.get_float("human.push_margin"),
            inference_stride=cfg.get_int("pipeline.inference_stride"),
            vote_capacity=cfg.get_int("schedule.vote_capacity"),
            schedule=DampingSchedule(
                b_low=cfg.get_float("schedule.b_low"),
                b_med=cfg.get_float("schedule.b_med"),
                b_high=cfg.get_float("schedule.b_high"),
                t_w=cfg.get_float("schedule.blend_duration"),
                theta_star=cfg.get_float("schedule.adaptation_threshold"),
            ),
        )

    def geometry(self, l_p: float, corner: int, iod: int) -> TaskGeometry:
        return TaskGeometry(l_p=l_p, corner=corner, iod=iod,
                            square_side=self.square_side,
                            required_depth=self.required_depth)


def profile_ranges_from_config(cfg: Config) -> dict:
    out = {}
    for key in ("speed_shape_a", "speed_shape_b", "duration_scale", "curvature",
                "k_p", "k_d", "ou_sigma", "ou_tau", "grab_bias", "reaction_time",
                "dither_amp", "dither_hz"):
        lo, hi = cfg.get_floats(f"human.{key}")
        out[key] = (lo, hi)
    return out


def run_trial(params: SimParams, geometry: TaskGeometry, profile: SubjectProfile,
              seed: int, controller: str = "expA",
              pipeline: IntentPipeline | None = None) -> TrialLog:
    """Run one trial to completion (or failure) and return its log.

    ``controller`` is "expA" for ground-truth adaptation, else C1|C2|C3 with
    ``pipeline`` providing online intent inference.
    """
    closed_loop = controller != "expA"
    if closed_loop and pipeline is None:
        raise ConfigurationError("closed-loop trials need an intent pipeline")
    dt = 1.0 / params.rate
    rho_cache: dict[float, float] = {}

    human = SyntheticHuman(
        profile, geometry, params.rate, seed,
        push_force=params.spring_stiffness * (params.required_depth + params.push_margin),
        saturation=params.saturation)
    workpiece = SpringWorkpiece(geometry, params.spring_stiffness)
    lifecycle = TrialLifecycle(geometry, params.rate, params.hold_duration)
    scheduler = DampingScheduler("C2" if not closed_loop else controller,
                                 params.schedule)
    if pipeline is not None:
        pipeline.reset()

    max_ticks = int(params.max_trial_duration * params.rate)
    data = np.zeros((max_ticks, len(TRIAL_COLUMNS)))
    pos = geometry.home.astype(float).copy()
    vel = np.zeros(3)
    flags: list[str] = []
    n_rows = 0

    for tick in range(max_ticks):
        t = tick * dt
        grabbed = human.grabbed(tick)
        phase = lifecycle.advance(tick, pos, grabbed)
        if lifecycle.events.miss:
            flags.append("miss")
            break
        if phase == TrialPhase.IN_CONTACT:
            workpiece.contact_started = True
        truth = lifecycle.label()

        f_h = human.force(tick, phase, pos, vel)
        f_env = workpiece.force(pos)
        f_int = f_h + f_env

        if closed_loop:
            out = pipeline.step(tick, pos, vel, f_h, f_int)
            voted, progress = out.voted, out.progress_clamped
            pred_label = int(out.voted)
            progress_logged = (out.progress_raw if out.progress_raw is not None
                               else NO_PREDICTION)
        else:
            voted, progress = truth, None
            pred_label = int(truth)
            progress_logged = NO_PREDICTION

        b = scheduler.step(t, voted, progress)

        row = data[tick]
        row[0] = t
        row[1:4] = pos
        row[4:7] = vel
        row[7:10] = f_h
        row[10:13] = f_env
        row[13:16] = f_int
        row[16] = b
        row[17] = int(truth)
        row[18] = pred_label
        row[19] = 0.0   # tau_true filled post hoc
        row[20] = 0.0   # lambda_true filled post hoc
        row[21] = progress_logged
        n_rows = tick + 1

        if phase == TrialPhase.DONE:
            break

        # exact first-order-lag update, then integrate position
        key = b
        rho = rho_cache.get(key)
        if rho is None:
            rho = math.exp(-b * dt / params.mass)
            rho_cache[key] = rho
        if not (np.all(np.isfinite(vel)) and np.all(np.isfinite(f_int))):
            raise DynamicsFault(f"non-finite state at tick {tick}")
        vel = rho * vel + (1.0 - rho) / b * f_int
        pos = pos + dt * vel

    data = data[:n_rows]
    ev = lifecycle.events
    meta = TrialMeta(
        subject=profile.subject_id, l_p=geometry.l_p, corner=geometry.corner,
        iod=geometry.iod, controller=controller, seed=seed, rate=params.rate,
        target_diameter=geometry.target_diameter,
        target_center=tuple(float(c) for c in geometry.target_center),
        t_g=ev.t_g, t_d=ev.t_d, t_c=ev.t_c, t_a=scheduler.t_a, t_f=ev.t_f,
        miss=ev.miss,
    )

    valid = not ev.miss and not math.isnan(ev.t_f)
    if math.isnan(ev.t_f) and not ev.miss:
        flags.append("timeout")
    if valid and (ev.t_c - ev.t_d) < params.min_driving_duration:
        valid = False
        flags.append("degenerate_driving")

    if valid:
        k_d = int(round(ev.t_d * params.rate))
        k_c = int(round(ev.t_c * params.rate))
        tau_col = data[:, 19]
        tau_col[k_d:k_c + 1] = (data[k_d:k_c + 1, 0] - ev.t_d) / (ev.t_c - ev.t_d)
        tau_col[k_c + 1:] = 1.0
        speed = np.linalg.norm(data[:, 4:7], axis=1)
        try:
            lam = trajectory_progress(speed, params.rate, ev.t_d, ev.t_c)
            lam_col = data[:, 20]
            lam_col[k_d:k_c + 1] = lam
            lam_col[k_c + 1:] = 1.0
        except DegenerateTrialError:
            valid = False
            flags.append("zero_path")

    meta.valid = valid
    meta.flags = tuple(flags)
    return TrialLog(meta=meta, data=data)


@dataclass
class Condition:
    profile: SubjectProfile
    l_p: float
    corner: int
    iod: int
    repetition: int


def expand_conditions(profiles: list[SubjectProfile], l_ps: list[float],
                      corners: list[int], iods: list[int],
                      repetitions: int) -> list[Condition]:
    out = []
    for profile in profiles:
        for l_p in l_ps:
            for corner in corners:
                for iod in iods:
                    for rep in range(repetitions):
                        out.append(Condition(profile, l_p, corner, iod, rep))
    return out


def generate_dataset(cfg: Config, out_dir: str, seed: int,
                     progress_cb=None) -> list[ManifestEntry]:
    """Experiment A: run every condition with ground-truth adaptation."""
    params = SimParams.from_config(cfg)
    profiles = sample_profiles(cfg.get_int("expA.n_profiles"), seed,
                               profile_ranges_from_config(cfg))
    conditions = expand_conditions(
        profiles, cfg.get_floats("expA.l_p"), cfg.get_ints("expA.corners"),
        cfg.get_ints("expA.iod"), cfg.get_int("expA.repetitions"))
    max_attempts = cfg.get_int("expA.max_attempts")

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, cond in enumerate(conditions):
        geometry = params.geometry(cond.l_p, cond.corner, cond.iod)
        log = None
        for attempt in range(max_attempts):
            s = trial_seed(seed, i, attempt)
            log = run_trial(params, geometry, cond.profile, s)
            if log.meta.valid:
                break
        log.meta.repetition = cond.repetition
        name = f"trial_{i:04d}.csv"
        save_trial(log, os.path.join(out_dir, name))
        entries.append(ManifestEntry.from_log(log, name))
        if progress_cb:
            progress_cb(i + 1, len(conditions))
    save_manifest(entries, out_dir)
    return entries


def run_closed_loop(cfg: Config, out_dir: str, seed: int, detector, estimator,
                    controllers: list[str] | None = None,
                    progress_cb=None) -> list[ManifestEntry]:
    """Experiment B: trained models in the loop at unseen conditions."""
    params = SimParams.from_config(cfg)
    controllers = controllers or cfg.get_strs("expB.controllers")
    for c in controllers:
        if c not in ("C1", "C2", "C3"):
            raise ConfigurationError(f"unknown controller {c!r}")
    profiles = sample_profiles(cfg.get_int("expB.n_profiles"), seed + 1,
                               profile_ranges_from_config(cfg))
    l_ps = cfg.get_floats("expB.l_p")
    iods = cfg.get_ints("expB.iod")
    corners = cfg.get_ints("expB.corners")
    reps = cfg.get_int("expB.repetitions")

    pipeline = IntentPipeline(detector, estimator, rate=params.rate,
                              inference_stride=params.inference_stride,
                              vote_capacity=params.vote_capacity)

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    index = 0
    total = len(controllers) * len(profiles) * len(l_ps) * len(corners) * len(iods) * reps
    for ci, controller in enumerate(controllers):
        conditions = expand_conditions(profiles, l_ps, corners, iods, reps)
        for j, cond in enumerate(conditions):
            geometry = params.geometry(cond.l_p, cond.corner, cond.iod)
            s = trial_seed(seed, ci, j)
            log = run_trial(params, geometry, cond.profile, s,
                            controller=controller, pipeline=pipeline)
            log.meta.repetition = cond.repetition
            name = f"trial_{controller}_{j:04d}.csv"
            save_trial(log, os.path.join(out_dir, name))
            entries.append(ManifestEntry.from_log(log, name))
            index += 1
            if progress_cb:
                progress_cb(index, total)
    save_manifest(entries, out_dir)
    return entries
