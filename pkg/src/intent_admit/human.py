"""Stochastic human-force generator for batch simulation.

Each subject profile carries a beta-shaped speed curve, a Fitts-like duration
model, a lateral path bow, PD tracking gains and Ornstein-Uhlenbeck force
noise.  The human is PD-coupled to a planned reference rather than replaying
open-loop forces, so controller damping changes feed back into effort and
velocity exactly as they would with a person holding the handle.

All randomness flows through a per-trial seed; a fixed seed reproduces the
generated trial bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .environment import TaskGeometry, TrialPhase

FORCE_SATURATION = 60.0
HOLD_STIFFNESS = 300.0
HOLD_DAMPING = 30.0
CONTACT_RAMP = 1.0
AIM_FRACTION = 0.5
PENETRATION_AIM = 0.008
ASSUMED_MASS = 50.0     # kg, internal model used for anticipatory drive
ASSUMED_DAMPING = 100.0  # Ns/m, the Driving damping subjects trained under

DUR_BASE = 1.5
DUR_PER_IOD = 0.35
DUR_LP_COEF = 0.25
DUR_JITTER = 0.08

PROFILE_RANGES = {
    "speed_shape_a": (1.1, 2.0),
    "speed_shape_b": (1.1, 2.4),
    "duration_scale": (0.7, 1.3),
    "curvature": (0.008, 0.028),
    "k_p": (280.0, 520.0),
    "k_d": (18.0, 45.0),
    "ou_sigma": (0.4, 1.2),
    "ou_tau": (0.06, 0.18),
    "grab_bias": (0.5, 2.0),
    "reaction_time": (0.12, 0.28),
    "dither_amp": (0.001, 0.006),
    "dither_hz": (0.8, 2.0),
}


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject movement style and noise parameters."""

    subject_id: str
    speed_shape_a: float
    speed_shape_b: float
    duration_scale: float
    curvature: float
    k_p: float
    k_d: float
    ou_sigma: float
    ou_tau: float
    grab_bias: float
    reaction_time: float
    dither_amp: float = 0.003
    dither_hz: float = 1.4
    seed: int = 0

    def __post_init__(self):
        if min(self.speed_shape_a, self.speed_shape_b) <= 0:
            raise ValueError("speed shape exponents must be positive")
        if min(self.k_p, self.k_d, self.ou_tau) <= 0:
            raise ValueError("gains and noise correlation time must be positive")


def sample_profiles(n: int, seed: int, ranges: dict | None = None) -> list[SubjectProfile]:
    """Draw ``n`` subject profiles uniformly from the documented ranges."""
    ranges = dict(PROFILE_RANGES, **(ranges or {}))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5fb]))
    profiles = []
    for i in range(n):
        kw = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in ranges.items()}
        profiles.append(SubjectProfile(subject_id=f"s{i}", seed=seed + i, **kw))
    return profiles


def planned_duration(profile: SubjectProfile, l_p: float, iod: float,
                     jitter: float = 1.0) -> float:
    """Fitts-like Driving duration: grows with IoD, mildly with distance."""
    base = DUR_BASE + DUR_PER_IOD * iod
    scale = 1.0 + DUR_LP_COEF * (l_p / 0.18 - 1.0)
    return profile.duration_scale * base * scale * jitter


@dataclass
class ReferencePlan:
    """Planned Driving trajectory, sampled at the control rate."""

    positions: np.ndarray      # (n_ticks + 1, 3)
    velocities: np.ndarray     # (n_ticks + 1, 3)
    accelerations: np.ndarray  # (n_ticks + 1, 3)
    duration: float
    aim: np.ndarray
    reaction_ticks: int

    def at(self, ticks_since_go: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = ticks_since_go - self.reaction_ticks
        zero = np.zeros(3)
        if k < 0:
            return self.positions[0], zero, zero
        if k >= len(self.positions):
            return self.positions[-1], zero, zero
        return self.positions[k], self.velocities[k], self.accelerations[k]


def plan_reference(profile: SubjectProfile, geometry: TaskGeometry, rate: float,
                   rng: np.random.Generator) -> ReferencePlan:
    """Plan a curved, beta-speed-profiled path from home into the target.

    The geometric path ends slightly past the workpiece plane so the PD
    tracker naturally initiates penetration inside the target circle.
    """
    home = geometry.home.astype(float)
    radius = geometry.target_diameter / 2.0 * AIM_FRACTION
    ang = rng.uniform(0.0, 2.0 * math.pi)
    r = radius * math.sqrt(rng.uniform())
    center = geometry.target_center
    # entry point on the plane, inside the circle; the path continues a short
    # way into the material along the plane normal to initiate penetration
    entry = np.array([center[0],
                      center[1] + r * math.cos(ang),
                      center[2] + r * math.sin(ang)])
    pen_end = entry + np.array([PENETRATION_AIM, 0.0, 0.0])

    # lateral bow lives in the workpiece plane; sin^2 shape so it and its
    # slope vanish at both ends of the approach segment
    d_yz = entry[1:] - home[1:]
    norm = float(np.hypot(d_yz[0], d_yz[1]))
    if norm < 1e-9:
        e_lat = np.array([0.0, 1.0, 0.0])
    else:
        e_lat = np.array([0.0, -d_yz[1] / norm, d_yz[0] / norm])
    if rng.uniform() < 0.5:
        e_lat = -e_lat
    amplitude = profile.curvature * rng.uniform(0.6, 1.4)
    len_a = float(np.linalg.norm(entry - home))
    u_q = len_a / (len_a + PENETRATION_AIM)

    def path_points(u_arr: np.ndarray) -> np.ndarray:
        out = np.empty((u_arr.shape[0], 3))
        approach = u_arr <= u_q
        ua = u_arr[approach] / u_q
        out[approach] = home[None, :] + ua[:, None] * (entry - home)[None, :] \
            + (amplitude * np.sin(math.pi * ua) ** 2)[:, None] * e_lat[None, :]
        ub = (u_arr[~approach] - u_q) / (1.0 - u_q)
        out[~approach] = entry[None, :] + ub[:, None] * (pen_end - entry)[None, :]
        return out

    jitter = float(np.clip(math.exp(rng.normal(0.0, DUR_JITTER)), 0.92, 1.08))
    duration = planned_duration(profile, geometry.l_p, geometry.iod, jitter)
    n_ticks = int(round(duration * rate))

    u = np.linspace(0.0, 1.0, 513)
    path = path_points(u)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])

    w = np.arange(n_ticks + 1) / n_ticks
    s_frac = betainc(profile.speed_shape_a + 1.0, profile.speed_shape_b + 1.0, w)
    u_of_t = np.interp(s_frac * arc[-1], arc, u)
    positions = path_points(u_of_t)

    # intermittent hunting around the plan (real guidance is never smooth);
    # tapered out well before the plane so the final approach stays aimed
    taper = 1.0 - np.clip((w - 0.55) / 0.25, 0.0, 1.0) ** 2
    amp = profile.dither_amp * rng.uniform(0.5, 1.5)
    f1 = profile.dither_hz * rng.uniform(0.8, 1.2)
    f2 = f1 * 0.77
    ph1, ph2 = rng.uniform(0.0, 2.0 * math.pi, 2)
    t_axis = w * duration
    e_path = (entry - home) / max(float(np.linalg.norm(entry - home)), 1e-9)
    wobble = (np.sin(2.0 * math.pi * f1 * t_axis + ph1)[:, None] * e_lat[None, :]
              + 0.6 * np.sin(2.0 * math.pi * f2 * t_axis + ph2)[:, None] * e_path[None, :])
    positions = positions + (amp * taper)[:, None] * wobble

    velocities = np.gradient(positions, 1.0 / rate, axis=0)
    accelerations = np.gradient(velocities, 1.0 / rate, axis=0)

    reaction = profile.reaction_time * rng.uniform(0.7, 1.3)
    return ReferencePlan(positions=positions, velocities=velocities,
                         accelerations=accelerations, duration=duration, aim=entry,
                         reaction_ticks=int(round(reaction * rate)))


class OrnsteinUhlenbeck:
    """Exact-discretization OU noise on three axes."""

    def __init__(self, sigma: float, tau: float, dt: float, rng: np.random.Generator):
        self.sigma = sigma
        self.decay = math.exp(-dt / tau)
        self.scale = sigma * math.sqrt(1.0 - self.decay ** 2)
        self.state = np.zeros(3)
        self._rng = rng

    def step(self) -> np.ndarray:
        self.state = self.decay * self.state + self.scale * self._rng.standard_normal(3)
        return self.state


class SyntheticHuman:
    """Closed-loop human model for one trial.

    Consumes the lifecycle phase plus the actual tool state each tick and
    produces the human force.  One fixed batch of random draws per tick keeps
    trials bit-reproducible for a given seed.
    """

    def __init__(self, profile: SubjectProfile, geometry: TaskGeometry, rate: float,
                 seed: int, push_force: float = 38.0,
                 saturation: float = FORCE_SATURATION):
        self.profile = profile
        self.geometry = geometry
        self.rate = rate
        self.dt = 1.0 / rate
        self.push_force = push_force
        self.saturation = saturation
        rng = np.random.default_rng(np.random.SeedSequence([seed, profile.seed]))
        self.grab_tick = int(round(rng.uniform(0.4, 1.2) * rate))
        self.plan = plan_reference(profile, geometry, rate, rng)
        self._ou = OrnsteinUhlenbeck(profile.ou_sigma, profile.ou_tau, self.dt, rng)
        bias_dir = rng.standard_normal(3)
        bias_dir /= np.linalg.norm(bias_dir)
        self._grab_bias = profile.grab_bias * bias_dir
        self._go_tick: int | None = None
        self._contact_tick: int | None = None
        self._done_tick: int | None = None
        self._contact_anchor = np.zeros(2)
        self._force_at_contact = np.zeros(3)
        self._force_at_done = np.zeros(3)
        self._last_force = np.zeros(3)

    def grabbed(self, tick: int) -> bool:
        return tick >= self.grab_tick

    def _saturate(self, f: np.ndarray) -> np.ndarray:
        mag = float(np.linalg.norm(f))
        if mag > self.saturation:
            return f * (self.saturation / mag)
        return f

    def force(self, tick: int, phase: TrialPhase, position: np.ndarray,
              velocity: np.ndarray) -> np.ndarray:
        noise = self._ou.step()  # advance every tick for reproducible draw counts
        home = self.geometry.home

        if phase == TrialPhase.AWAIT_GRAB:
            f = np.zeros(3)

        elif phase == TrialPhase.HOLD:
            f = (HOLD_STIFFNESS * (home - position) - HOLD_DAMPING * velocity
                 + self._grab_bias + 0.25 * noise)

        elif phase == TrialPhase.GO:
            if self._go_tick is None:
                self._go_tick = tick
            since_go = tick - self._go_tick
            p_ref, v_ref, a_ref = self.plan.at(since_go)
            # anticipatory drive of the felt dynamics (the subject learned the
            # robot's inertia and its usual Driving damping in training)
            f_ff = ASSUMED_MASS * a_ref + ASSUMED_DAMPING * v_ref
            # fine alignment near the target: stiffer tracking, steadier hand
            n_plan = max(len(self.plan.positions) - 1, 1)
            frac = min(max((since_go - self.plan.reaction_ticks) / n_plan, 0.0), 1.0)
            s = min(max((frac - 0.7) / 0.3, 0.0), 1.0)
            steady = 3.0 * s * s - 2.0 * s ** 3
            gain = 1.0 + steady
            f = (f_ff + gain * self.profile.k_p * (p_ref - position)
                 + gain * self.profile.k_d * (v_ref - velocity)
                 + (1.0 - 0.7 * steady) * noise)

        elif phase == TrialPhase.IN_CONTACT:
            if self._contact_tick is None:
                self._contact_tick = tick
                self._contact_anchor = position[1:].copy()
                self._force_at_contact = self._last_force.copy()
            s = min((tick - self._contact_tick) * self.dt / CONTACT_RAMP, 1.0)
            mix = 3.0 * s * s - 2.0 * s ** 3
            push = np.array([self.push_force, 0.0, 0.0])
            f = (1.0 - mix) * self._force_at_contact + mix * push
            f = f + 0.8 * noise
            f[1] += self.profile.k_p * (self._contact_anchor[0] - position[1]) \
                - self.profile.k_d * velocity[1]
            f[2] += self.profile.k_p * (self._contact_anchor[1] - position[2]) \
                - self.profile.k_d * velocity[2]

        else:  # Done: release the handle
            if self._done_tick is None:
                self._done_tick = tick
                self._force_at_done = self._last_force.copy()
            s = min((tick - self._done_tick) * self.dt / CONTACT_RAMP, 1.0)
            f = (1.0 - s) * self._force_at_done

        f = self._saturate(f)
        self._last_force = f
        return f
