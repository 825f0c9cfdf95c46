import numpy as np
import pytest

from intent_admit.core import (
    NO_PREDICTION,
    SlidingWindowSpec,
    Subtask,
    TimeSeries,
    TrialLog,
    TrialMeta,
    TRIAL_COLUMNS,
    check_log_invariants,
    load_manifest,
    load_trial,
    magnitude,
    magnitude_channels,
    ManifestEntry,
    save_manifest,
    save_trial,
    window,
    window_array,
)
from intent_admit.errors import ConfigurationError, LogFormatError

DETECTOR = SlidingWindowSpec(length_s=0.5, downsample=4)
ESTIMATOR = SlidingWindowSpec(length_s=8.0, downsample=32)


def test_window_counts_match_model_inputs():
    assert DETECTOR.n_steps(500.0) == 63
    assert ESTIMATOR.n_steps(500.0) == 125


def test_window_padding_and_content():
    values = np.arange(1000, dtype=float).reshape(-1, 1)
    series = TimeSeries(rate=500.0, values=values)
    w = window(series, DETECTOR, end_tick=500)
    assert w.shape == (63, 1)
    assert w[-1, 0] == 500.0
    assert w[-2, 0] == 496.0
    assert w[0, 0] == 500.0 - 62 * 4

    w0 = window(series, DETECTOR, end_tick=0)
    assert w0[-1, 0] == 0.0
    assert np.all(w0[:-1] == 0.0)


def test_window_slides_one_sample_per_tick():
    rng = np.random.default_rng(0)
    series = TimeSeries(rate=500.0, values=rng.standard_normal((600, 2)))
    a = window(series, DETECTOR, end_tick=400)
    b = window(series, DETECTOR, end_tick=401)
    # content at tick k+1 references samples shifted by exactly one raw tick
    assert np.array_equal(b[-1], series.values[401])
    assert np.array_equal(b[:-1] * 0 + b[1:], b[1:])
    for j in range(63):
        assert np.array_equal(a[j], series.values[400 - 4 * (62 - j)])
        assert np.array_equal(b[j], series.values[401 - 4 * (62 - j)])


def test_window_spec_validation():
    with pytest.raises(ConfigurationError):
        SlidingWindowSpec(length_s=-1.0, downsample=4)
    with pytest.raises(ConfigurationError):
        SlidingWindowSpec(length_s=0.5, downsample=0)


def test_window_array_start_tick_masks_history():
    values = np.ones((100, 1))
    out = window_array(values, 500.0, DETECTOR, end_tick=50, start_tick=40)
    # only ticks 40..50 visible: indices 50, 46, 42 kept, earlier zeroed
    assert out[-1, 0] == 1.0 and out[-2, 0] == 1.0 and out[-3, 0] == 1.0
    assert np.all(out[:-3] == 0.0)


def _tiny_log(n=10):
    data = np.zeros((n, len(TRIAL_COLUMNS)))
    data[:, 0] = np.arange(n) / 500.0
    data[:, 4] = 0.1                      # vx
    data[:, 7] = 3.0                      # fhx
    data[:, 8] = 4.0                      # fhy
    data[:, 10] = -1.0                    # fex
    data[:, 13:16] = data[:, 7:10] + data[:, 10:13]
    data[:, 16] = 300.0
    data[:, 17] = np.minimum(np.arange(n) // 3, 3)
    data[:, 21] = NO_PREDICTION
    meta = TrialMeta(subject="s1", t_g=0.001, t_d=0.004, t_c=0.012, t_f=0.018,
                     seed=5)
    return TrialLog(meta=meta, data=data)


def test_magnitude_channels():
    log = _tiny_log()
    v, fi, fh = magnitude_channels(log, 0)
    assert v == pytest.approx(0.1)
    assert fh == pytest.approx(5.0)       # 3-4-5 triangle
    assert fi == pytest.approx(np.hypot(2.0, 4.0))
    assert magnitude(np.zeros(3)) == 0.0
    # opposite forces cancel in the interaction force
    f_h = np.array([1.0, 0, 0])
    f_env = np.array([-1.0, 0, 0])
    assert magnitude(f_h + f_env) == 0.0


def test_trial_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(42)
    n = 50
    data = rng.standard_normal((n, len(TRIAL_COLUMNS)))
    data[:, 13:16] = data[:, 7:10] + data[:, 10:13]
    data[:, 17] = np.sort(rng.integers(0, 4, n))
    meta = TrialMeta(subject="s3", l_p=0.16, corner=2, iod=5, controller="C3",
                     repetition=1, seed=99, t_g=0.1, t_d=0.5, t_c=1.5, t_a=1.2,
                     t_f=2.0, flags=("x", "y"), extra={"note": "hello"})
    log = TrialLog(meta=meta, data=data)
    path = tmp_path / "t.csv"
    save_trial(log, str(path))
    back = load_trial(str(path))
    assert np.array_equal(back.data, log.data)
    assert back.meta.subject == "s3" and back.meta.corner == 2
    assert back.meta.flags == ("x", "y")
    assert back.meta.extra["note"] == "hello"
    assert back.meta.t_a == 1.2


def test_load_trial_reports_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# subject = s0\nt,px,py\n0.0,0.0,0.0\n")
    with pytest.raises(LogFormatError, match="missing columns"):
        load_trial(str(path))


def test_log_invariants():
    log = _tiny_log()
    check_log_invariants(log)
    broken = _tiny_log()
    broken.data[3, 13] += 1e-9  # F_int != F_h + F_env
    with pytest.raises(LogFormatError, match="F_int"):
        check_log_invariants(broken)
    non_mono = _tiny_log()
    non_mono.data[:, 17] = [0, 1, 2, 1, 2, 3, 3, 3, 3, 3]
    with pytest.raises(LogFormatError, match="decrease"):
        check_log_invariants(non_mono)


def test_subtask_order():
    assert list(Subtask) == [Subtask.IDLE, Subtask.TOOL_ATTACHMENT,
                             Subtask.DRIVING, Subtask.CONTACT]
    assert Subtask.CONTACT > Subtask.DRIVING > Subtask.TOOL_ATTACHMENT > Subtask.IDLE


def test_manifest_roundtrip(tmp_path):
    entries = [
        ManifestEntry(path="a.csv", subject="s0", l_p=0.12, corner=0, iod=3,
                      controller="expA", repetition=0, seed=1, valid=True,
                      t_d=1.0, t_c=2.0, t_a=float("nan"), t_f=2.5),
        ManifestEntry(path="b.csv", subject="s1", l_p=0.24, corner=3, iod=5,
                      controller="C3", repetition=1, seed=2, valid=False,
                      t_d=1.0, t_c=3.0, t_a=2.5, t_f=3.5),
    ]
    save_manifest(entries, str(tmp_path))
    back = load_manifest(str(tmp_path))
    assert len(back) == 2
    assert back[0].subject == "s0" and back[1].iod == 5
    assert back[1].valid is False
    assert np.isnan(back[0].t_a) and back[1].t_a == 2.5
    assert back[0].category_value("distance") == 0.12
    assert back[1].category_value("subject") == "s1"
