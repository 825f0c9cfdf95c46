"""Task geometry, virtual spring workpiece, trial lifecycle, ground truth.

The workpiece is a vertical plane at ``x = L_p`` (approach axis x, home at the
origin).  Targets sit on the corners of a 15 x 15 cm square in the plane; the
target diameter follows the Fitts index-of-difficulty relation
``W = L_p / (2^IoD - 1)``.  Contact counts only inside the target circle; a
plane crossing outside it is a miss and invalidates the trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Subtask
from .errors import ConfigurationError, DegenerateTrialError

SPRING_STIFFNESS = 8000.0
REQUIRED_DEPTH = 0.004
SQUARE_SIDE = 0.15
HOLD_DURATION = 3.0

# corner index -> (y, z) offsets on the square, counter-clockwise from upper right
CORNER_SIGNS = ((1, 1), (-1, 1), (-1, -1), (1, -1))

PROMPTS = {
    "AwaitGrab": "GRAB THE HANDLE",
    "Hold3s": "HOLD",
    "Go": "GO",
    "InContact": "GO",
    "Done": "RETRACT",
}


class TrialPhase(Enum):
    AWAIT_GRAB = "AwaitGrab"
    HOLD = "Hold3s"
    GO = "Go"
    IN_CONTACT = "InContact"
    DONE = "Done"

    @property
    def prompt(self) -> str:
        return PROMPTS[self.value]

    @property
    def subtask(self) -> Subtask:
        return {
            TrialPhase.AWAIT_GRAB: Subtask.IDLE,
            TrialPhase.HOLD: Subtask.TOOL_ATTACHMENT,
            TrialPhase.GO: Subtask.DRIVING,
            TrialPhase.IN_CONTACT: Subtask.CONTACT,
            TrialPhase.DONE: Subtask.CONTACT,
        }[self]


def target_diameter(l_p: float, iod: float) -> float:
    """Fitts target diameter for perpendicular distance ``l_p`` and difficulty ``iod``."""
    if l_p <= 0 or iod <= 0:
        raise ConfigurationError(f"need l_p > 0 and iod > 0, got {l_p}, {iod}")
    return l_p / (2.0 ** iod - 1.0)


@dataclass(frozen=True)
class TaskGeometry:
    """Home position, workpiece plane and one Fitts target on it."""

    l_p: float
    corner: int
    iod: int
    home: np.ndarray = field(default_factory=lambda: np.zeros(3))
    square_side: float = SQUARE_SIDE
    required_depth: float = REQUIRED_DEPTH

    def __post_init__(self):
        if self.corner not in (0, 1, 2, 3):
            raise ConfigurationError(f"corner index must be 0..3, got {self.corner}")
        if self.required_depth <= 0:
            raise ConfigurationError("required depth must be positive")
        target_diameter(self.l_p, self.iod)  # validates l_p, iod

    @property
    def plane_x(self) -> float:
        return float(self.home[0]) + self.l_p

    @property
    def target_diameter(self) -> float:
        return target_diameter(self.l_p, self.iod)

    @property
    def target_center(self) -> np.ndarray:
        sy, sz = CORNER_SIGNS[self.corner]
        half = self.square_side / 2.0
        return np.array([self.plane_x,
                         float(self.home[1]) + sy * half,
                         float(self.home[2]) + sz * half])

    def lateral_offset(self, position: np.ndarray) -> float:
        """In-plane distance from the target center."""
        c = self.target_center
        return math.hypot(position[1] - c[1], position[2] - c[2])

    def inside_target(self, position: np.ndarray) -> bool:
        return self.lateral_offset(position) <= self.target_diameter / 2.0

    def penetration(self, position: np.ndarray) -> float:
        """Depth past the workpiece plane along the approach axis (>= 0)."""
        return max(0.0, float(position[0]) - self.plane_x)


class SpringWorkpiece:
    """Linear spring rendered only inside the target circle.

    Before the first in-circle penetration the plane is transparent; once
    contact has begun, the spring keeps acting on any penetration (the tool is
    inside the drilled hole) regardless of lateral drift.
    """

    def __init__(self, geometry: TaskGeometry, stiffness: float = SPRING_STIFFNESS):
        if stiffness <= 0:
            raise ConfigurationError("spring stiffness must be positive")
        self.geometry = geometry
        self.stiffness = stiffness
        self.contact_started = False

    def force(self, position: np.ndarray) -> np.ndarray:
        delta = self.geometry.penetration(position)
        if delta <= 0.0:
            return np.zeros(3)
        if not self.contact_started and not self.geometry.inside_target(position):
            return np.zeros(3)
        return np.array([-self.stiffness * delta, 0.0, 0.0])


def environment_force(position: np.ndarray, workpiece: SpringWorkpiece) -> np.ndarray:
    return workpiece.force(position)


def time_progress(t: float, t_d: float, t_c: float) -> float:
    """Fraction of the Driving duration elapsed at time ``t``."""
    if t_c <= t_d:
        raise DegenerateTrialError(f"degenerate Driving interval [{t_d}, {t_c}]")
    return (t - t_d) / (t_c - t_d)


def trajectory_progress(speed: np.ndarray, rate: float, t_d: float, t_c: float) -> np.ndarray:
    """Fraction of Driving path length traveled at each tick of [t_d, t_c].

    ``speed`` holds ‖V‖ for the whole trial; integration is trapezoidal at the
    control rate.  Returns the per-tick progress over the closed interval
    [tick(t_d), tick(t_c)].
    """
    k_d = int(round(t_d * rate))
    k_c = int(round(t_c * rate))
    if k_c <= k_d:
        raise DegenerateTrialError(f"degenerate Driving interval [{t_d}, {t_c}]")
    seg = speed[k_d:k_c + 1]
    increments = 0.5 * (seg[:-1] + seg[1:]) / rate
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    total = cum[-1]
    if total <= 0.0:
        raise DegenerateTrialError("zero path length during Driving")
    return cum / total


@dataclass
class TrialEvents:
    """Event timestamps gathered while a trial runs (seconds; NaN = not yet)."""

    t_g: float = math.nan
    t_d: float = math.nan
    t_c: float = math.nan
    t_f: float = math.nan
    miss: bool = False
    miss_time: float = math.nan


class TrialLifecycle:
    """Phase machine driving one trial and emitting ground-truth labels.

    Phases advance as AwaitGrab -> Hold3s (grab observed) -> Go (after exactly
    ``hold_duration`` seconds) -> InContact (first in-circle penetration)
    -> Done (depth reached).  A plane crossing outside the circle records a
    miss and invalidates the trial without advancing the phase.
    """

    def __init__(self, geometry: TaskGeometry, rate: float,
                 hold_duration: float = HOLD_DURATION):
        self.geometry = geometry
        self.rate = rate
        self.hold_ticks = int(round(hold_duration * rate))
        self.phase = TrialPhase.AWAIT_GRAB
        self.events = TrialEvents()
        self._hold_count = 0

    def label(self) -> Subtask:
        return self.phase.subtask

    def advance(self, tick: int, position: np.ndarray, grabbed: bool) -> TrialPhase:
        """Update the phase from the current omniscient state; returns the new phase."""
        t = tick / self.rate
        if self.phase == TrialPhase.AWAIT_GRAB:
            if grabbed:
                self.phase = TrialPhase.HOLD
                self.events.t_g = t
                self._hold_count = 0
        elif self.phase == TrialPhase.HOLD:
            if not grabbed:
                # releasing before the GO cue restarts the attachment wait;
                # live sessions truncate their recording when this happens
                self.phase = TrialPhase.AWAIT_GRAB
                self.events = TrialEvents()
                self._hold_count = 0
            else:
                self._hold_count += 1
                if self._hold_count >= self.hold_ticks:
                    self.phase = TrialPhase.GO
                    self.events.t_d = t
        elif self.phase == TrialPhase.GO:
            if self.geometry.penetration(position) > 0.0:
                if self.geometry.inside_target(position):
                    self.phase = TrialPhase.IN_CONTACT
                    self.events.t_c = t
                elif not self.events.miss:
                    self.events.miss = True
                    self.events.miss_time = t
        elif self.phase == TrialPhase.IN_CONTACT:
            if self.geometry.penetration(position) >= self.geometry.required_depth:
                self.phase = TrialPhase.DONE
                self.events.t_f = t
        return self.phase
