"""Command-line entry points: generate, train, evaluate, run, replay, serve."""

from __future__ import annotations

import argparse
import os
import sys

from .config import load_config
from .core import load_dataset, load_trial, resolve_trial_path
from .errors import IntentAdmitError
from .estimators.artifacts import load_artifact
from .evaluation import aggregate
from .reports import evaluate_dataset, write_csv, write_summary_json
from .simulate import generate_dataset, run_closed_loop
from .training import replay_log, train_models


def _progress(label: str):
    def cb(done: int, total: int):
        if done == total or done % 25 == 0:
            print(f"{label}: {done}/{total}", flush=True)
    return cb


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file layered over the packaged defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    entries = generate_dataset(cfg, args.out, args.seed, _progress("generate"))
    n_valid = sum(e.valid for e in entries)
    print(f"wrote {len(entries)} trials ({n_valid} valid) to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    target = args.target or cfg.get_str("train.target")
    results = train_models(cfg, args.dataset, args.model, target, args.cv,
                           args.out, args.seed, _progress("folds"))
    for res in results:
        print(f"artifact: {res.artifact_path}")
    if args.cv:
        rows = [row for res in results for row in res.trial_rows]
        write_csv(rows, os.path.join(args.out, f"{args.model}_fold_trials.csv"))
        agg = aggregate(rows, group_key="fold")
        write_csv(agg, os.path.join(args.out, f"{args.model}_fold_aggregate.csv"))
        print(f"fold reports in {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    summary = evaluate_dataset(args.dataset, args.out)
    print(f"evaluated {summary['n_trials']} trials "
          f"({summary['n_skipped_invalid']} invalid skipped); reports in {args.out}")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    rate = cfg.get_float("sim.rate")
    detector, _ = load_artifact(args.detector, expect_rate=rate)
    estimator, est_meta = load_artifact(args.estimator, expect_rate=rate)
    controllers = args.controller or None
    entries = run_closed_loop(cfg, args.out, args.seed, detector, estimator,
                              controllers=controllers,
                              progress_cb=_progress("trials"))
    target = est_meta.get("target") or cfg.get_str("train.target")
    for e in entries:
        if e.valid:
            path = resolve_trial_path(args.out, e)
            log = load_trial(path)
            log.meta.extra["target"] = target
            from .core import save_trial
            save_trial(log, path)
    summary = evaluate_dataset(args.out, os.path.join(args.out, "reports"))
    print(f"ran {len(entries)} closed-loop trials; reports in {args.out}/reports")
    return 0


def cmd_replay(args) -> int:
    cfg = load_config(args.config)
    rate = cfg.get_float("sim.rate")
    stride = cfg.get_int("pipeline.inference_stride")
    vote = cfg.get_int("schedule.vote_capacity")
    detector, _ = load_artifact(args.detector, expect_rate=rate)
    estimator, est_meta = load_artifact(args.estimator, expect_rate=rate)
    target = est_meta.get("target") or cfg.get_str("train.target")
    entries = load_dataset(args.dataset)
    rows = []
    for e in entries:
        log = load_trial(resolve_trial_path(args.dataset, e))
        _, _, det, reg = replay_log(log, detector, estimator, target, stride, vote)
        row = {"trial": e.path, "controller": e.controller}
        row.update(det.as_row())
        row.update(reg.as_row())
        rows.append(row)
    os.makedirs(args.out, exist_ok=True)
    write_csv(rows, os.path.join(args.out, "replay_trials.csv"))
    write_csv(aggregate(rows, group_key="controller"),
              os.path.join(args.out, "replay_aggregate.csv"))
    write_summary_json({"n_trials": len(rows)}, os.path.join(args.out, "replay_summary.json"))
    print(f"replayed {len(rows)} trials; reports in {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve
    cfg = load_config(args.config)
    serve(cfg, args.detector, args.estimator, args.out,
          host=args.host, port=args.port, seed=args.seed,
          frontend_dir=args.frontend)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intent-admit",
        description="adaptive admittance control workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run Experiment A and write a dataset")
    _add_common(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("train", help="train models, optionally with structured CV")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True,
                   choices=["detector", "cnn", "gpr", "dtw", "mj"])
    p.add_argument("--target", choices=["tau", "lambda"])
    p.add_argument("--cv", choices=["subject", "distance", "corner", "iod"])
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="compute metric reports from logged columns")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("run", help="run Experiment B closed loop with trained models")
    _add_common(p)
    p.add_argument("--detector", required=True, help="detector artifact path")
    p.add_argument("--estimator", required=True, help="progress estimator artifact path")
    p.add_argument("--controller", action="append",
                   choices=["C1", "C2", "C3"],
                   help="repeatable; default runs the configured controller set")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("replay", help="re-run inference over logged signals")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--detector", required=True)
    p.add_argument("--estimator", required=True)
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="host a live wall-clock session")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--detector", required=True)
    p.add_argument("--estimator", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--frontend", help="directory with the built operator console")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except IntentAdmitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
