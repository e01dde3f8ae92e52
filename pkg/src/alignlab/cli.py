"""Command-line surface: gen | train | sweep | metrics | pid | report.

Exit codes: 0 success, 1 runtime/data error, 2 usage error. Every command
is deterministic given its inputs. The sweep command reads an optional
declarative JSON config; flags override config values, and the worker
count can also come from the ALIGNLAB_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import pid as pidmod
from . import reporting, syndata, trainer
from .simmetrics import alignment_report, ingest_matrix
from .trainer import TrainConfig

CONFIG_SECTIONS = {
    "generation": {"tau", "split_sizes"},
    "training": {
        "lr",
        "weight_decay",
        "batch_size",
        "epochs",
        "tau",
        "eval_every",
        "patience",
        "metric_subsample",
        "knn_k",
        "svcca_variance_keep",
    },
    "sweep": {"r_levels", "lambdas", "seeds", "workers"},
    "output": {"results", "summary"},
}


class CliError(Exception):
    """Runtime/data error mapped to exit code 1."""


class UsageError(Exception):
    """Invalid argument values mapped to exit code 2."""


def load_sweep_config(path) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"config {path}: malformed JSON at byte {exc.pos}: {exc.msg}") from exc
    for section, keys in doc.items():
        if section not in CONFIG_SECTIONS:
            raise CliError(f"config {path}: unknown section {section!r}")
        if not isinstance(keys, dict):
            raise CliError(f"config {path}: section {section!r} must be an object")
        unknown = set(keys) - CONFIG_SECTIONS[section]
        if unknown:
            raise CliError(f"config {path}: unknown keys in {section!r}: {sorted(unknown)}")
    return doc


def cmd_gen(args) -> int:
    try:
        spec = syndata.GenSpec(r=args.r, tau=args.tau, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = syndata.generate(spec)
    syndata.serialize(ds, args.out)
    sizes = {k: len(v) for k, v in ds.splits.items()}
    print(f"wrote {args.out}: R={spec.r} U={spec.u} tau={spec.tau} seed={spec.seed}")
    print(f"samples={spec.n_total} splits={sizes['train']}/{sizes['val']}/{sizes['test']}")
    return 0


def cmd_train(args) -> int:
    if not os.path.exists(args.data):
        raise CliError(f"dataset file not found: {args.data}")
    ds = syndata.deserialize(args.data)
    try:
        cfg = TrainConfig(
            lam=args.lam,
            lr=args.lr,
            weight_decay=args.weight_decay,
            batch_size=args.batch_size,
            epochs=args.epochs,
            seed=args.seed,
            tau=args.tau,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    record = trainer.train(ds, cfg, checkpoint_path=args.checkpoint)
    with open(args.out, "w") as fh:
        json.dump(record.to_dict(), fh, indent=2)
    print(f"acc_A={record.acc_A:.4f} acc_B={record.acc_B:.4f} status={record.status}")
    print(f"wrote {args.out}" + (f" and {args.checkpoint}" if args.checkpoint else ""))
    if record.status != "ok":
        raise CliError(f"training ended with status {record.status!r}")
    return 0


def cmd_sweep(args) -> int:
    config = load_sweep_config(args.config) if args.config else {}
    gen_cfg = config.get("generation", {})
    train_cfg = dict(config.get("training", {}))
    sweep_cfg = config.get("sweep", {})
    out_cfg = config.get("output", {})

    r_levels = args.r_levels if args.r_levels is not None else sweep_cfg.get("r_levels", list(trainer.DEFAULT_R_LEVELS))
    lambdas = args.lambdas if args.lambdas is not None else sweep_cfg.get("lambdas", list(trainer.DEFAULT_LAMBDAS))
    seeds = args.seeds if args.seeds is not None else sweep_cfg.get("seeds", list(trainer.DEFAULT_SEEDS))
    if args.epochs is not None:
        train_cfg["epochs"] = args.epochs
    workers = args.workers
    if workers is None:
        workers = sweep_cfg.get("workers", int(os.environ.get("ALIGNLAB_WORKERS", "1")))
    results_path = args.out or out_cfg.get("results", "results.csv")
    summary_path = args.summary or out_cfg.get("summary", "summary.csv")

    base_cfg = TrainConfig(**train_cfg)
    records = trainer.sweep(
        r_levels=r_levels,
        lambdas=lambdas,
        seeds=seeds,
        base_cfg=base_cfg,
        dataset_tau=gen_cfg.get("tau", 1.0),
        split_sizes=gen_cfg.get("split_sizes"),
        workers=workers,
        progress=(lambda n: print(f"{n} runs done", file=sys.stderr)) if args.verbose else None,
    )
    reporting.write_results_csv(records, results_path)
    reporting.write_summary_csv(reporting.summarize([reporting.record_row(r) for r in records]), summary_path)
    failed = sum(1 for r in records if r.status != "ok")
    print(f"wrote {results_path} ({len(records)} runs, {failed} failed) and {summary_path}")
    return 0


def cmd_metrics(args) -> int:
    fa = ingest_matrix(args.a)
    fb = ingest_matrix(args.b)
    if fa.shape[0] != fb.shape[0]:
        raise CliError(f"row counts differ: {fa.shape[0]} vs {fb.shape[0]}")
    report = alignment_report(fa, fb, knn_k=args.k, svcca_variance_keep=args.variance_keep)
    doc = report.to_dict()
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(json.dumps(doc))
    return 0


def cmd_pid(args) -> int:
    try:
        pmf = pidmod.JointPmf.from_json(args.pmf)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    try:
        result = pidmod.broja_decompose(pmf, tol=args.tol)
    except pidmod.PidConvergenceError as exc:
        raise CliError(str(exc)) from exc
    doc = result.to_dict()
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(
        f"R={result.r:.6f} U1={result.u1:.6f} U2={result.u2:.6f} S={result.s:.6f} bits"
    )
    return 0


def cmd_report(args) -> int:
    if not os.path.exists(args.results):
        raise CliError(f"results file not found: {args.results}")
    rows = reporting.read_results_csv(args.results)
    report = reporting.build_report(rows, tol=args.tol)
    print(reporting.format_report(report))
    if args.out:
        reporting.write_report_json(report, args.out)
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alignlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset file")
    p.add_argument("--r", type=int, required=True, help="redundancy level 0..8")
    p.add_argument("--tau", type=float, default=1.0, help="label softmax temperature")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one run on a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="alignment strength")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.1, help="InfoNCE temperature")
    p.add_argument("--out", default="run.json")
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run the (R, lambda, seed) grid")
    p.add_argument("--config", default=None, help="declarative JSON config")
    p.add_argument("--r-levels", type=int, nargs="+", default=None)
    p.add_argument("--lambdas", type=float, nargs="+", default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None, help="results CSV path")
    p.add_argument("--summary", default=None, help="summary CSV path")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="alignment metrics for two matrix files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--k", type=int, default=10, help="mutual-KNN neighborhood size")
    p.add_argument("--variance-keep", type=float, default=0.99)
    p.add_argument("--out", default="alignment.json")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pid", help="decompose a joint pmf file")
    p.add_argument("pmf")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--out", default="pid.json")
    p.set_defaults(func=cmd_pid)

    p = sub.add_parser("report", help="trend summary from a results CSV")
    p.add_argument("results")
    p.add_argument("--tol", type=float, default=reporting.TREND_TOL)
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (CliError, ValueError, OSError, syndata.DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
