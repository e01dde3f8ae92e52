"""Results persistence and trend analysis for sweep outputs.

The results CSV has one row per (R, lambda, seed) run; the first line is a
schema-version comment. The summary aggregates seed means per (R, lambda)
cell, and the report classifies the accuracy-vs-lambda trend per R with a
fixed rule:

  FLAT           max - min within tolerance
  INTERIOR_PEAK  peak strictly inside the lambda grid, above both
                 endpoints by more than the tolerance
  MONOTONE_UP    last grid value above the first by more than the tolerance
  MONOTONE_DOWN  first grid value above the last by more than the tolerance

Default tolerance is 0.005 (half an accuracy point), matching seed noise
at 4 seeds.
"""

from __future__ import annotations

import csv
import json

import numpy as np
from scipy import stats

SCHEMA_COMMENT = "# alignlab-results schema=1"
RESULT_COLUMNS = (
    "R",
    "lambda",
    "seed",
    "acc_A",
    "acc_B",
    "cka",
    "svcca",
    "mknn",
    "task_loss",
    "align_loss",
    "status",
)
TREND_TOL = 0.005


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def record_row(record) -> dict:
    """Flatten one RunRecord into a CSV row dict."""
    losses = record.epoch_losses
    if losses:
        k = record.best_epoch if 0 <= record.best_epoch < len(losses) else len(losses) - 1
        task_loss = losses[k].task_A + losses[k].task_B
        align_loss = losses[k].align
    else:
        task_loss = float("nan")
        align_loss = float("nan")
    al = record.alignment
    return {
        "R": record.spec["r"],
        "lambda": record.config["lam"],
        "seed": record.config["seed"],
        "acc_A": record.acc_A,
        "acc_B": record.acc_B,
        "cka": al.cka if al else float("nan"),
        "svcca": al.svcca if al else float("nan"),
        "mknn": al.mknn if al else float("nan"),
        "task_loss": task_loss,
        "align_loss": align_loss,
        "status": record.status,
    }


def write_results_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_COMMENT + "\n")
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        for rec in records:
            row = record_row(rec)
            writer.writerow({k: _fmt(row[k]) for k in RESULT_COLUMNS})


def read_results_csv(path) -> list[dict]:
    """Parse a results CSV back into typed row dicts."""
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            fh.seek(0)
        for row in csv.DictReader(fh):
            parsed = {"status": row["status"]}
            parsed["R"] = int(row["R"])
            parsed["seed"] = int(row["seed"])
            for key in ("lambda", "acc_A", "acc_B", "cka", "svcca", "mknn", "task_loss", "align_loss"):
                parsed[key] = float(row[key])
            rows.append(parsed)
    if not rows:
        raise ValueError(f"no result rows in {path}")
    return rows


def summarize(rows: list[dict]) -> list[dict]:
    """Seed means per (R, lambda) cell over rows with status ok."""
    cells = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        cells.setdefault((row["R"], row["lambda"]), []).append(row)
    out = []
    for (r, lam) in sorted(cells):
        group = cells[(r, lam)]
        entry = {"R": r, "lambda": lam, "n_seeds": len(group)}
        for key in ("acc_A", "acc_B", "cka", "svcca", "mknn", "task_loss", "align_loss"):
            entry[key] = float(np.mean([g[key] for g in group]))
        entry["acc_mean"] = 0.5 * (entry["acc_A"] + entry["acc_B"])
        out.append(entry)
    if not out:
        raise ValueError("no successful runs to summarize")
    return out


def write_summary_csv(summary: list[dict], path) -> None:
    cols = ("R", "lambda", "n_seeds", "acc_A", "acc_B", "acc_mean", "cka", "svcca", "mknn", "task_loss", "align_loss")
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_COMMENT + "\n")
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for entry in summary:
            writer.writerow({k: _fmt(entry[k]) for k in cols})


def classify_trend(lambdas, values, tol: float = TREND_TOL) -> str:
    """Classify an accuracy-vs-lambda curve; see module docstring."""
    order = np.argsort(lambdas)
    v = np.asarray(values, dtype=np.float64)[order]
    if len(v) < 2:
        return "FLAT"
    if v.max() - v.min() <= tol:
        return "FLAT"
    peak = int(np.argmax(v))
    if 0 < peak < len(v) - 1 and v[peak] > v[0] + tol and v[peak] > v[-1] + tol:
        return "INTERIOR_PEAK"
    if v[-1] >= v[0] + tol:
        return "MONOTONE_UP"
    if v[0] >= v[-1] + tol:
        return "MONOTONE_DOWN"
    return "FLAT"


def build_report(rows: list[dict], tol: float = TREND_TOL) -> dict:
    """Per-R trend table: seed-mean accuracy/alignment vs lambda, trend
    class, peak lambda, and Spearman rank correlation of each alignment
    metric against lambda."""
    summary = summarize(rows)
    by_r = {}
    for entry in summary:
        by_r.setdefault(entry["R"], []).append(entry)
    report = {"tolerance": tol, "per_r": {}}
    for r, entries in sorted(by_r.items()):
        entries.sort(key=lambda e: e["lambda"])
        lams = [e["lambda"] for e in entries]
        accs = [e["acc_mean"] for e in entries]
        block = {
            "lambdas": lams,
            "acc_mean": accs,
            "acc_A": [e["acc_A"] for e in entries],
            "acc_B": [e["acc_B"] for e in entries],
            "trend": classify_trend(lams, accs, tol),
            "peak_lambda": lams[int(np.argmax(accs))],
            "alignment": {},
            "spearman": {},
        }
        for metric in ("cka", "svcca", "mknn"):
            vals = [e[metric] for e in entries]
            block["alignment"][metric] = vals
            if len(set(lams)) > 1 and len(set(vals)) > 1:
                rho = float(stats.spearmanr(lams, vals).statistic)
            else:
                rho = float("nan")
            block["spearman"][metric] = rho
        report["per_r"][str(r)] = block
    return report


def format_report(report: dict) -> str:
    """Human-readable per-R trend table."""
    lines = []
    for r, block in sorted(report["per_r"].items(), key=lambda kv: int(kv[0])):
        lines.append(f"R={r}  trend={block['trend']}  peak_lambda={block['peak_lambda']:g}")
        lines.append("  lambda   acc_mean   cka      svcca    mknn")
        for i, lam in enumerate(block["lambdas"]):
            lines.append(
                f"  {lam:<8g} {block['acc_mean'][i]:<10.4f} "
                f"{block['alignment']['cka'][i]:<8.4f} "
                f"{block['alignment']['svcca'][i]:<8.4f} "
                f"{block['alignment']['mknn'][i]:<8.4f}"
            )
        sp = block["spearman"]
        lines.append(
            f"  spearman(lambda, metric): cka={sp['cka']:.3f} svcca={sp['svcca']:.3f} mknn={sp['mknn']:.3f}"
        )
    return "\n".join(lines)


def write_report_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)
