"""End-to-end CLI flow: train artifacts, closed-loop run, replay, reports."""

import json
import os

import pytest

from intent_admit.cli import main as cli_main
from intent_admit.estimators.artifacts import save_artifact


@pytest.fixture(scope="module")
def artifacts(small_stack, tmp_path_factory):
    out, entries, det, est = small_stack
    d = tmp_path_factory.mktemp("artifacts")
    det_path = str(d / "detector.json")
    est_path = str(d / "cnn.json")
    save_artifact(det, det_path, train_manifest="x")
    save_artifact(est, est_path, target="lambda", train_manifest="x")
    return out, det_path, est_path


def _write_cfg(tmp_path):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("expB.n_profiles = 1\nexpB.repetitions = 1\n"
                   "expB.corners = 0, 2\n")
    return str(cfg)


def test_run_then_evaluate_and_replay(artifacts, tmp_path):
    ds, det_path, est_path = artifacts
    cfg = _write_cfg(tmp_path)
    out = str(tmp_path / "expB")
    rc = cli_main(["run", "--config", cfg, "--seed", "9", "--out", out,
                   "--detector", det_path, "--estimator", est_path,
                   "--controller", "C1", "--controller", "C3"])
    assert rc == 0
    assert os.path.exists(os.path.join(out, "manifest.csv"))
    assert os.path.exists(os.path.join(out, "reports", "summary.json"))
    with open(os.path.join(out, "reports", "summary.json")) as f:
        summary = json.load(f)
    assert summary["n_trials"] >= 1

    rep = str(tmp_path / "replay")
    rc = cli_main(["replay", "--config", cfg, "--seed", "0", "--out", rep,
                   "--dataset", out, "--detector", det_path,
                   "--estimator", est_path])
    assert rc == 0
    assert os.path.exists(os.path.join(rep, "replay_trials.csv"))
    # replay twice is byte-identical (pure function of logs + artifacts)
    rep2 = str(tmp_path / "replay2")
    cli_main(["replay", "--config", cfg, "--seed", "0", "--out", rep2,
              "--dataset", out, "--detector", det_path,
              "--estimator", est_path])
    for name in ("replay_trials.csv", "replay_aggregate.csv"):
        a = open(os.path.join(rep, name), "rb").read()
        b = open(os.path.join(rep2, name), "rb").read()
        assert a == b


def test_run_rejects_missing_artifacts(tmp_path):
    rc = cli_main(["run", "--out", str(tmp_path / "x"), "--seed", "1",
                   "--detector", "/nonexistent/det.json",
                   "--estimator", "/nonexistent/cnn.json"])
    assert rc == 2  # reported as a clean CLI error, not a traceback
