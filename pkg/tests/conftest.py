import pytest

from intent_admit.config import load_config
from intent_admit.core import load_dataset
from intent_admit.estimators.detector import SubtaskDetector
from intent_admit.estimators.progress import NeuralProgressEstimator
from intent_admit.simulate import generate_dataset
from intent_admit.training import build_detector_dataset, build_estimator_dataset


@pytest.fixture(scope="session")
def small_stack(tmp_path_factory):
    """Tiny dataset plus quickly trained models, shared across test modules."""
    out = str(tmp_path_factory.mktemp("smallds"))
    cfg = load_config(overrides={
        "expA.n_profiles": 2, "expA.repetitions": 1,
        "expA.l_p": [0.16, 0.20], "expA.corners": [0, 2], "expA.iod": [3, 5],
    })
    generate_dataset(cfg, out, seed=17)
    entries = load_dataset(out)
    x, y = build_detector_dataset(out, entries, stride=40)
    det = SubtaskDetector(epochs=12, seed=0).fit(x, y)
    xe, ye = build_estimator_dataset(out, entries, stride=30, target="lambda")
    est = NeuralProgressEstimator(epochs=12, seed=0).fit(xe, ye)
    return out, entries, det, est
