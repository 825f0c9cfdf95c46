import numpy as np
import pytest

from intent_admit.errors import ArtifactError
from intent_admit.estimators.features import (
    AccelStream,
    FeatureSpec,
    Standardizer,
    acceleration_magnitude,
    detector_feature_spec,
    estimator_channel_matrix,
    estimator_feature_spec,
)


def test_spec_shapes():
    det = detector_feature_spec()
    est = estimator_feature_spec()
    assert (det.n_steps, det.n_channels) == (63, 3)
    assert (est.n_steps, est.n_channels) == (125, 2)


def test_feature_spec_roundtrip_and_mismatch():
    det = detector_feature_spec()
    again = FeatureSpec.from_dict(det.to_dict())
    assert again == det
    est = estimator_feature_spec()
    with pytest.raises(ArtifactError, match="mismatch"):
        det.check_compatible(est)


def test_acceleration_offline_online_identical():
    rng = np.random.default_rng(0)
    v = rng.standard_normal((400, 3)).cumsum(axis=0) * 0.001
    offline = acceleration_magnitude(v, 500.0)
    stream = AccelStream(500.0)
    online = np.array([stream.update(v[k]) for k in range(len(v))])
    np.testing.assert_array_equal(offline, online)


def test_acceleration_of_linear_ramp():
    # constant acceleration a0 along x: magnitude settles at |a0|
    rate = 500.0
    a0 = 0.8
    t = np.arange(1000) / rate
    v = np.column_stack([a0 * t, np.zeros_like(t), np.zeros_like(t)])
    a = acceleration_magnitude(v, rate)
    assert a[-1] == pytest.approx(a0, rel=1e-3)


def test_acceleration_is_causal():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((300, 3))
    a1 = acceleration_magnitude(v, 500.0)
    v2 = v.copy()
    v2[200:] += 99.0  # future change must not affect earlier outputs
    a2 = acceleration_magnitude(v2, 500.0)
    np.testing.assert_array_equal(a1[:200], a2[:200])


def test_estimator_channels_shape():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((100, 3))
    chans = estimator_channel_matrix(v, 500.0)
    assert chans.shape == (100, 2)
    np.testing.assert_allclose(chans[:, 0], np.linalg.norm(v, axis=1))


def test_standardizer():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 63, 3)) * np.array([2.0, 5.0, 0.5]) + 1.0
    s = Standardizer.fit(x)
    z = s.apply(x)
    np.testing.assert_allclose(z.mean(axis=(0, 1)), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=(0, 1)), 1.0, atol=1e-12)
    back = Standardizer.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.mean, s.mean)
