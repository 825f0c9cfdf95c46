"""Report emission: per-trial CSV tables, aggregates, JSON summary, long format."""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .core import NO_PREDICTION, load_dataset, load_trial, resolve_trial_path
from .evaluation import aggregate, detection_metrics, regression_metrics, task_metrics


def _fmt_cell(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: list[dict], path: str) -> None:
    if not rows:
        with open(path, "w", encoding="utf-8") as f:
            f.write("")
        return
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt_cell(row.get(c, "")) for c in cols))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def write_long_table(rows: list[dict], path: str, id_keys: tuple[str, ...]) -> None:
    """Plot-ready long format: one (ids..., metric, value) line per metric."""
    out = []
    for row in rows:
        ids = {k: row[k] for k in id_keys if k in row}
        for k, v in row.items():
            if k in id_keys or not isinstance(v, (int, float)) or isinstance(v, bool):
                continue
            out.append({**ids, "metric": k, "value": float(v)})
    write_csv(out, path)


def write_summary_json(summary: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)


def evaluate_dataset(dataset_dir: str, out_dir: str) -> dict:
    """Compute every metric from the recorded columns of a dataset.

    Detection metrics come from the logged voted predictions; regression
    metrics are emitted when the log carries progress predictions; task
    metrics need the recorded event timestamps.  Returns the summary dict.
    """
    entries = load_dataset(dataset_dir, valid_only=False)
    rows = []
    skipped = []
    for e in entries:
        if not e.valid:
            skipped.append(e.path)
            continue
        log = load_trial(resolve_trial_path(dataset_dir, e))
        row = {"trial": e.path, "controller": e.controller, "subject": e.subject,
               "l_p": e.l_p, "corner": e.corner, "iod": e.iod}
        det = detection_metrics(log.subtask_true, log.subtask_pred, log.meta.rate)
        row.update(det.as_row())
        sl = log.driving_slice()
        preds = log.progress_pred[sl]
        if np.any(preds != NO_PREDICTION):
            target = log.meta.extra.get("target", "lambda")
            truth = log.tau_true if target == "tau" else log.lambda_true
            row.update(regression_metrics(truth[sl], preds).as_row())
        task = task_metrics(log)
        row.update(task.as_row())
        if not math.isnan(log.meta.t_a):
            row["t_a"] = log.meta.t_a
            row["early_adaptation"] = log.meta.t_a < log.meta.t_c
        rows.append(row)

    os.makedirs(out_dir, exist_ok=True)
    write_csv(rows, os.path.join(out_dir, "trial_metrics.csv"))
    agg = aggregate(rows, group_key="controller") if rows else []
    write_csv(agg, os.path.join(out_dir, "aggregate_by_controller.csv"))
    write_long_table(rows, os.path.join(out_dir, "trial_metrics_long.csv"),
                     id_keys=("trial", "controller", "subject", "l_p", "corner", "iod"))
    summary = {
        "n_trials": len(rows),
        "n_skipped_invalid": len(skipped),
        "skipped": skipped,
        "aggregate": agg,
    }
    write_summary_json(summary, os.path.join(out_dir, "summary.json"))
    return summary
