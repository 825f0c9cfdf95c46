import numpy as np
import pytest

from intent_admit.estimators.dtw import (
    DTWProgressEstimator,
    open_end_dtw,
    resample_sequence,
)


def _template(m=200, c=2, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, m)
    cols = [np.sin(np.pi * t) + 0.1 * k + 0.05 * rng.standard_normal(m).cumsum() / m
            for k in range(c)]
    return np.column_stack(cols)


def test_resample_shapes():
    seq = np.arange(20, dtype=float).reshape(-1, 2)
    out = resample_sequence(seq, 50)
    assert out.shape == (50, 2)
    assert out[0, 0] == seq[0, 0] and out[-1, 1] == seq[-1, 1]


class TestOpenEnd:
    def test_full_self_match(self):
        t = _template()
        j, _ = open_end_dtw(t, t)
        assert j == len(t) - 1

    def test_half_prefix(self):
        t = _template()
        j, _ = open_end_dtw(t[:100], t)
        assert abs(j - 99) <= 1

    def test_single_start_sample(self):
        t = _template()
        j, _ = open_end_dtw(t[:1], t)
        assert j == 0

    def test_prefixes_within_two_indices(self):
        t = _template(m=200)
        for frac in np.arange(0.1, 0.95, 0.1):
            n = int(round(frac * len(t)))
            j, _ = open_end_dtw(t[:n], t)
            assert abs(j - (n - 1)) <= 2, frac


class TestEstimator:
    def _sequences(self, n=12, seed=1):
        rng = np.random.default_rng(seed)
        seqs = []
        for _ in range(n):
            m = rng.integers(80, 160)
            t = np.linspace(0.0, 1.0, m)
            base = np.column_stack([np.sin(np.pi * t), np.cos(np.pi * t / 2)])
            seqs.append(base * rng.uniform(0.8, 1.2) + 0.02 * rng.standard_normal((m, 2)))
        return seqs

    def test_fit_and_template_shape(self):
        est = DTWProgressEstimator(template_length=100)
        est.fit(self._sequences())
        assert est.template_.shape == (100, 2)

    def test_progress_bounds_and_self_query(self):
        est = DTWProgressEstimator(template_length=100)
        est.fit(self._sequences())
        full = est.template_raw_
        assert est.progress(full) == pytest.approx(1.0)
        assert est.progress(full[:1]) == pytest.approx(0.0, abs=0.02)
        half = est.progress(full[:50])
        assert 0.4 <= half <= 0.6

    def test_progress_nondecreasing_on_growing_consistent_query(self):
        est = DTWProgressEstimator(template_length=120)
        est.fit(self._sequences())
        full = est.template_raw_
        prev = -1.0
        for n in range(5, len(full), 7):
            p = est.progress(full[:n])
            assert p >= prev - 1e-12
            prev = p

    def test_fit_requires_sequences(self):
        with pytest.raises(ValueError):
            DTWProgressEstimator().fit([])
