"""Two-layer intent pipeline: subtask detection and motion-progress estimation."""

from .features import (
    DETECTOR_SPEC,
    ESTIMATOR_SPEC,
    FeatureSpec,
    Standardizer,
    acceleration_magnitude,
    estimator_channel_matrix,
)
from .detector import SubtaskDetector
from .progress import NeuralProgressEstimator
from .minimum_jerk import MinimumJerkEstimator, minimum_jerk_position
from .dtw import DTWProgressEstimator, open_end_dtw
from .gpr import GPRProgressEstimator
from .artifacts import load_artifact, save_artifact
from .pipeline import IntentPipeline

__all__ = [
    "DETECTOR_SPEC",
    "ESTIMATOR_SPEC",
    "FeatureSpec",
    "Standardizer",
    "acceleration_magnitude",
    "estimator_channel_matrix",
    "SubtaskDetector",
    "NeuralProgressEstimator",
    "MinimumJerkEstimator",
    "minimum_jerk_position",
    "DTWProgressEstimator",
    "open_end_dtw",
    "GPRProgressEstimator",
    "load_artifact",
    "save_artifact",
    "IntentPipeline",
]
