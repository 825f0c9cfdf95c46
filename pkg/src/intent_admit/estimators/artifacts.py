"""Self-describing JSON model artifacts.

Every artifact records its kind, constructor parameters, feature spec,
normalization statistics, fitted state and the SHA-256 of the training
manifest.  Loading validates the embedded feature spec against the consumer's
rate; a mismatch is an error rather than silent misuse.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from ..errors import ArtifactError
from .detector import SubtaskDetector
from .dtw import DTWProgressEstimator
from .features import FeatureSpec, Standardizer
from .gpr import GPRProgressEstimator
from .minimum_jerk import MinimumJerkEstimator
from .progress import NeuralProgressEstimator

SCHEMA = "intent-admit-model/1"


def manifest_sha256(manifest_path: str) -> str:
    with open(manifest_path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def _weights_payload(net) -> list:
    return [p.tolist() for p in net.parameters()]


def _restore_weights(net, payload: list) -> None:
    params = net.parameters()
    if len(params) != len(payload):
        raise ArtifactError(f"weight count mismatch: {len(payload)} != {len(params)}")
    for p, stored in zip(params, payload):
        arr = np.asarray(stored, dtype=float)
        if arr.shape != p.shape:
            raise ArtifactError(f"weight shape mismatch: {arr.shape} != {p.shape}")
        p[...] = arr


def save_artifact(estimator, path: str, target: str | None = None,
                  train_manifest: str | None = None, extra: dict | None = None) -> None:
    if isinstance(estimator, SubtaskDetector):
        kind = "detector"
        state = {
            "standardizer": estimator.standardizer_.to_dict(),
            "weights": _weights_payload(estimator.net_),
        }
    elif isinstance(estimator, NeuralProgressEstimator):
        kind = "cnn"
        state = {
            "standardizer": estimator.standardizer_.to_dict(),
            "weights": _weights_payload(estimator.net_),
        }
    elif isinstance(estimator, GPRProgressEstimator):
        kind = "gpr"
        state = {
            "standardizer": estimator.standardizer_.to_dict(),
            "signal_variance": estimator.signal_variance_,
            "length_scale": estimator.length_scale_,
            "y_mean": estimator.y_mean_,
            "lml": estimator.lml_,
            "x_train": estimator.x_train_.tolist(),
            "alpha_vec": estimator.alpha_vec_.tolist(),
        }
    elif isinstance(estimator, DTWProgressEstimator):
        kind = "dtw"
        state = {
            "template_raw": estimator.template_raw_.tolist(),
            "mean": estimator.mean_.tolist(),
            "std": estimator.std_.tolist(),
        }
    elif isinstance(estimator, MinimumJerkEstimator):
        kind = "mj"
        state = {}
    else:
        raise ArtifactError(f"cannot serialize estimator of type {type(estimator)}")

    doc = {
        "schema": SCHEMA,
        "kind": kind,
        "target": target,
        "params": estimator.get_params(),
        "state": state,
        "train_manifest_sha256": train_manifest,
        "extra": extra or {},
    }
    if hasattr(estimator, "feature_spec"):
        doc["feature_spec"] = estimator.feature_spec.to_dict()
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(doc, f)
    os.replace(tmp, path)


def load_artifact(path: str, expect_rate: float | None = None):
    """Load an estimator; returns (estimator, metadata dict)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read artifact {path}: {exc}") from exc
    if doc.get("schema") != SCHEMA:
        raise ArtifactError(f"{path}: unknown artifact schema {doc.get('schema')!r}")
    kind = doc["kind"]
    params = doc["params"]
    for key in ("length_scale_bounds", "signal_variance_bounds"):
        if key in params and isinstance(params[key], list):
            params[key] = tuple(params[key])
    state = doc["state"]

    if kind == "detector":
        est = SubtaskDetector(**params)
        est.standardizer_ = Standardizer.from_dict(state["standardizer"])
        est.net_ = est._build(np.random.default_rng(0))
        _restore_weights(est.net_, state["weights"])
    elif kind == "cnn":
        est = NeuralProgressEstimator(**params)
        est.standardizer_ = Standardizer.from_dict(state["standardizer"])
        est.net_ = est._build(np.random.default_rng(0))
        _restore_weights(est.net_, state["weights"])
    elif kind == "gpr":
        est = GPRProgressEstimator(**params)
        est.standardizer_ = Standardizer.from_dict(state["standardizer"])
        est.signal_variance_ = float(state["signal_variance"])
        est.length_scale_ = float(state["length_scale"])
        est.y_mean_ = float(state["y_mean"])
        est.lml_ = float(state["lml"])
        est.x_train_ = np.asarray(state["x_train"], dtype=float)
        est.alpha_vec_ = np.asarray(state["alpha_vec"], dtype=float)
    elif kind == "dtw":
        est = DTWProgressEstimator(**params)
        est.template_raw_ = np.asarray(state["template_raw"], dtype=float)
        est.mean_ = np.asarray(state["mean"], dtype=float)
        est.std_ = np.asarray(state["std"], dtype=float)
        est.template_ = (est.template_raw_ - est.mean_) / est.std_
    elif kind == "mj":
        est = MinimumJerkEstimator(**params)
    else:
        raise ArtifactError(f"{path}: unknown model kind {kind!r}")

    if expect_rate is not None and "feature_spec" in doc:
        stored = FeatureSpec.from_dict(doc["feature_spec"])
        expected = type(est)(**{**params, "rate": expect_rate}).feature_spec
        expected.check_compatible(stored)

    meta = {"kind": kind, "target": doc.get("target"),
            "train_manifest_sha256": doc.get("train_manifest_sha256"),
            "extra": doc.get("extra", {})}
    return est, meta
