"""Adaptive admittance control workbench with two-layer intent recognition.

A deterministic 500 Hz simulator of contact-rich tool guidance against a
virtual spring workpiece, a synthetic human model, a subtask detector plus
motion-progress estimators (minimum jerk, DTW, GPR, neural), damping
scheduling with cubic blends, evaluation metrics, and a CLI / telemetry
server for live operation.
"""

from .controller import (
    AdmittanceParams,
    DampingSchedule,
    DampingScheduler,
    VotingBuffer,
    blend_damping,
    step_admittance,
)
from .core import (
    Subtask,
    TimeSeries,
    SlidingWindowSpec,
    TrialLog,
    TrialMeta,
    load_trial,
    save_trial,
    window,
)
from .environment import (
    SpringWorkpiece,
    TaskGeometry,
    TrialPhase,
    target_diameter,
    time_progress,
    trajectory_progress,
)
from .human import SubjectProfile, SyntheticHuman, plan_reference, sample_profiles

__version__ = "0.1.0"

__all__ = [
    "AdmittanceParams",
    "DampingSchedule",
    "DampingScheduler",
    "VotingBuffer",
    "blend_damping",
    "step_admittance",
    "Subtask",
    "TimeSeries",
    "SlidingWindowSpec",
    "TrialLog",
    "TrialMeta",
    "load_trial",
    "save_trial",
    "window",
    "SpringWorkpiece",
    "TaskGeometry",
    "TrialPhase",
    "target_diameter",
    "time_progress",
    "trajectory_progress",
    "SubjectProfile",
    "SyntheticHuman",
    "plan_reference",
    "sample_profiles",
    "__version__",
]
