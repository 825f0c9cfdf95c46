"""Admittance dynamics, damping schedule with cubic blending, prediction voting.

The admittance law maps the interaction force to a commanded velocity through
a first-order lag ``V(s)/F(s) = 1/(m s + b)`` applied identically on all three
translational axes.  The discrete update uses the exact zero-order-hold
solution of that lag, so a step response matches the continuous system to
machine precision at any rate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import Subtask
from .errors import ConfigurationError, DynamicsFault

B_LOW = 100.0
B_MED = 300.0
B_HIGH = 500.0
BLEND_DURATION = 0.2
ADAPTATION_THRESHOLD = 0.75
VOTE_CAPACITY = 100
ADMITTANCE_MASS = 50.0


@dataclass(frozen=True)
class AdmittanceParams:
    m: float = ADMITTANCE_MASS
    b: float = B_HIGH
    dt: float = 0.002

    def __post_init__(self):
        if self.m <= 0 or self.b <= 0 or self.dt <= 0:
            raise ConfigurationError(f"admittance params must be positive: {self}")


def step_admittance(velocity: np.ndarray, f_int: np.ndarray,
                    params: AdmittanceParams) -> np.ndarray:
    """Advance the reference velocity one tick under interaction force ``f_int``.

    Exact discretization of v' = (F - b v)/m with F held over the tick:
    v(t+dt) = rho v(t) + (1 - rho) F/b,  rho = exp(-b dt / m).
    """
    if not (np.all(np.isfinite(velocity)) and np.all(np.isfinite(f_int))):
        raise DynamicsFault(f"non-finite dynamics input: v={velocity} F={f_int}")
    rho = math.exp(-params.b * params.dt / params.m)
    return rho * velocity + (1.0 - rho) / params.b * f_int


def blend_damping(b_from: float, b_to: float, t_since_start: float, t_w: float) -> float:
    """Smoothstep interpolation from ``b_from`` to ``b_to`` over ``t_w`` seconds.

    C1-continuous at both ends: slope is zero at s=0 and s=1.
    """
    if t_since_start < 0:
        raise ConfigurationError("t_since_start must be >= 0")
    s = min(max(t_since_start / t_w, 0.0), 1.0)
    return b_from + (b_to - b_from) * (3.0 * s * s - 2.0 * s * s * s)


def blend_damping_rate(b_from: float, b_to: float, t_since_start: float, t_w: float) -> float:
    """Time derivative of blend_damping, in Ns/m per second."""
    s = t_since_start / t_w
    if s < 0.0 or s > 1.0:
        return 0.0
    return (b_to - b_from) * (6.0 * s - 6.0 * s * s) / t_w


class VotingBuffer:
    """Majority filter over the most recent subtask predictions.

    Ties resolve to the later task phase (prefers the higher-damping,
    more conservative interpretation).
    """

    def __init__(self, capacity: int = VOTE_CAPACITY, fill: Subtask = Subtask.IDLE):
        if capacity < 1:
            raise ConfigurationError(f"vote capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._buf: deque[int] = deque([int(fill)] * capacity, maxlen=capacity)
        self._counts = [0, 0, 0, 0]
        self._counts[int(fill)] = capacity

    def vote(self, new_pred: Subtask) -> Subtask:
        evicted = self._buf[0]
        self._buf.append(int(new_pred))
        self._counts[evicted] -= 1
        self._counts[int(new_pred)] += 1
        best = max(range(4), key=lambda s: (self._counts[s], s))
        return Subtask(best)

    def current(self) -> Subtask:
        best = max(range(4), key=lambda s: (self._counts[s], s))
        return Subtask(best)


@dataclass(frozen=True)
class DampingSchedule:
    """Damping targets per subtask plus blend and adaptation constants."""

    b_low: float = B_LOW
    b_med: float = B_MED
    b_high: float = B_HIGH
    t_w: float = BLEND_DURATION
    theta_star: float = ADAPTATION_THRESHOLD

    def __post_init__(self):
        if not (0.0 < self.b_low < self.b_med < self.b_high):
            raise ConfigurationError(f"need 0 < b_low < b_med < b_high, got {self}")
        if self.t_w <= 0:
            raise ConfigurationError("blend duration must be positive")
        if not (0.0 < self.theta_star <= 1.0):
            raise ConfigurationError("adaptation threshold must be in (0, 1]")

    def target_for(self, subtask: Subtask) -> float:
        if subtask == Subtask.DRIVING:
            return self.b_low
        if subtask == Subtask.CONTACT:
            return self.b_high
        return self.b_med


class DampingScheduler:
    """Per-trial damping state machine for controllers C1, C2 and C3.

    C1 holds ``b_high`` throughout.  C2 starts a smoothstep blend toward the
    voted subtask's target whenever the vote changes.  C3 additionally blends
    to ``b_high`` the first time the estimated progress reaches the adaptation
    threshold during voted Driving; that adaptation latches, so the later
    Driving -> Contact transition changes nothing and b never drops again.

    A blend interrupted by a new target restarts from the instantaneous
    damping value, keeping b(t) continuous under vote flicker.
    """

    def __init__(self, mode: str, schedule: DampingSchedule | None = None):
        if mode not in ("C1", "C2", "C3"):
            raise ConfigurationError(f"controller mode must be C1|C2|C3, got {mode!r}")
        self.mode = mode
        self.schedule = schedule or DampingSchedule()
        sched = self.schedule
        self._voted = Subtask.IDLE
        self._fired = False
        self.t_a = math.nan
        if mode == "C1":
            self._b_from = sched.b_high
            self._b_to = sched.b_high
        else:
            self._b_from = sched.b_med
            self._b_to = sched.b_med
        self._blend_t0 = -math.inf  # blend long finished at trial start

    @property
    def fired(self) -> bool:
        return self._fired

    def _value_at(self, t: float) -> float:
        return blend_damping(self._b_from, self._b_to, t - self._blend_t0, self.schedule.t_w)

    def _start_blend(self, t: float, target: float) -> None:
        if target == self._b_to:
            return  # already at, or blending toward, this target
        self._b_from = self._value_at(t)
        self._b_to = target
        self._blend_t0 = t

    def step(self, t: float, voted_subtask: Subtask, progress_pred: float | None) -> float:
        """Return the damping to apply at time ``t``."""
        if self.mode == "C1":
            return self.schedule.b_high

        if voted_subtask != self._voted:
            self._voted = voted_subtask
            if not self._fired:
                self._start_blend(t, self.schedule.target_for(voted_subtask))

        if (self.mode == "C3" and not self._fired
                and voted_subtask == Subtask.DRIVING
                and progress_pred is not None
                and progress_pred >= self.schedule.theta_star):
            self._fired = True
            self.t_a = t
            self._start_blend(t, self.schedule.b_high)

        return self._value_at(t)
