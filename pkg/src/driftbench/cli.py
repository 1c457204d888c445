"""``driftbench partition | run | report``.

Every output file is written to a temporary sibling and renamed into place.
The run manifest is written last.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Dict, List

from . import __version__
from .config import ExperimentConfig, load_config
from .data import SPLIT_NAMES, SplitSet, split_histogram, validate_splitset
from .errors import DriftBenchError, ReportError
from .experiment import build_dataset, build_splits, reports_by_group, run_matrix
from .federation import traces_to_jsonl
from .metrics import CSV_HEADER, DriftReport, metrics_csv_rows, report_to_csv
from .schedule import NUM_PHASES, PhasePlan
from .svg import box_plot, line_plot

log = logging.getLogger("driftbench")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed_override is not None:
        cfg = cfg.with_seed(args.seed_override)
    if args.out_dir:
        cfg.output_dir = args.out_dir
    return cfg


def histogram_csv(splitset: SplitSet, dataset) -> str:
    hist = split_histogram(splitset, dataset)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", *SPLIT_NAMES, "total"])
    for c in range(dataset.num_classes):
        row = [int(hist[s][c]) for s in SPLIT_NAMES]
        w.writerow([c, *row, sum(row)])
    return buf.getvalue()


def cmd_partition(cfg: ExperimentConfig) -> Dict[str, str]:
    dataset = build_dataset(cfg)
    splitset = build_splits(cfg, dataset)
    validate_splitset(splitset, dataset)
    out = Path(cfg.output_dir)
    return {
        "splits": str(atomic_write(out / "splits.json", splitset.to_json())),
        "class_histogram": str(atomic_write(out / "class_histogram.csv", histogram_csv(splitset, dataset))),
    }


def cmd_run(cfg: ExperimentConfig, jobs: int = 1) -> int:
    started = time.monotonic()
    out = Path(cfg.output_dir)
    outputs: Dict[str, str] = {}
    failures: List[dict] = []

    dataset = build_dataset(cfg)
    splitset = build_splits(cfg, dataset)
    validate_splitset(splitset, dataset)
    outputs["splits"] = str(atomic_write(out / "splits.json", splitset.to_json()))

    results = run_matrix(cfg, dataset, splitset, jobs)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        if r.metrics is None:
            failures.append({"paradigm": r.paradigm, "clients": r.clients,
                             "permutation": "".join(r.permutation), "error": r.error})
            continue
        w.writerows(metrics_csv_rows(r.paradigm, r.clients, PhasePlan(r.permutation, r.paradigm), r.metrics))
        traces = [t for phase in r.traces for t in phase]
        outputs[f"trace:{r.key}"] = str(atomic_write(out / "traces" / f"{r.key}.jsonl", traces_to_jsonl(traces)))
    outputs["metrics"] = str(atomic_write(out / "metrics.csv", buf.getvalue()))

    for rep in reports_by_group(cfg, results):
        stem = f"drift_{rep.paradigm}_c{rep.client_count}"
        outputs[f"report:{stem}"] = str(atomic_write(out / "reports" / f"{stem}.json", rep.to_json()))
        outputs[f"report_csv:{stem}"] = str(atomic_write(out / "reports" / f"{stem}.csv", report_to_csv(rep)))

    manifest = {
        "tool": "driftbench",
        "tool_version": __version__,
        "config_digest": cfg.digest(),
        "effective_config": cfg.to_dict(),
        "cells_total": len(results),
        "cells_failed": len(failures),
        "failures": failures,
        "outputs": outputs,
        "wall_clock_seconds": round(time.monotonic() - started, 3),
    }
    atomic_write(out / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    for f in failures:
        log.error("cell failed: %s", f)
    return 1 if failures else 0


def load_reports(results_dir) -> List[DriftReport]:
    rdir = Path(results_dir) / "reports"
    files = sorted(rdir.glob("drift_*.json")) if rdir.is_dir() else []
    if not files:
        raise ReportError(f"no drift reports found under {rdir}")
    reports = []
    for f in files:
        try:
            reports.append(DriftReport.from_json(f.read_text()))
        except (ValueError, KeyError, TypeError) as exc:
            raise ReportError(f"cannot parse {f}: {exc}") from None
    reports.sort(key=lambda r: (r.client_count, r.paradigm))
    return reports


def render_report(reports: List[DriftReport]):
    """Return ``(svg files by relative path, text summary)`` without touching disk."""
    files: Dict[str, str] = {}
    phases = [f"phase {k}" for k in range(NUM_PHASES)]
    groups = []
    lines = [f"{'paradigm':<9} {'clients':>7} {'n':>3} {'min':>7} {'q1':>7} {'median':>7} "
             f"{'q3':>7} {'max':>7} {'mean':>7} {'pooled':>7} {'degen':>5}"]
    for rep in reports:
        for p in rep.permutations:
            series = {
                "train accuracy": [m.train_accuracy for m in p.metrics],
                "test accuracy": [m.test_accuracy for m in p.metrics],
                "MIA AUC": [m.mia_auc for m in p.metrics],
            }
            title = f"{rep.paradigm}, {rep.client_count} client(s), order {p.plan.label}"
            files[f"lines_{rep.paradigm}_c{rep.client_count}_{p.plan.label}.svg"] = line_plot(title, phases, series)
        s = rep.correlation_summary
        summary = None if s is None else {"min": s.min, "q1": s.q1, "median": s.median, "q3": s.q3, "max": s.max}
        groups.append((f"{rep.client_count}c {rep.paradigm}", rep.pearson_values, summary))
        vals = rep.pearson_values
        fmt = lambda v: f"{v:7.3f}" if v is not None else f"{'-':>7}"
        mean = sum(vals) / len(vals) if vals else None
        lines.append(
            f"{rep.paradigm:<9} {rep.client_count:>7} {len(vals):>3} "
            + " ".join(fmt(None if s is None else getattr(s, k)) for k in ("min", "q1", "median", "q3", "max"))
            + f" {fmt(mean)} {fmt(rep.pooled_pearson)} {rep.degenerate_count:>5}"
        )
    files["correlation_boxplot.svg"] = box_plot(
        "Pearson(train accuracy, MIA AUC) per permutation", groups)
    return files, "\n".join(lines) + "\n"


def cmd_report(results_dir, out_dir=None) -> Dict[str, str]:
    reports = load_reports(results_dir)
    files, table = render_report(reports)
    target = Path(out_dir) if out_dir else Path(results_dir) / "plots"
    written = {name: str(atomic_write(target / name, text)) for name, text in files.items()}
    sys.stdout.write(table)
    return written


_HELP = {
    "partition": "write splits.json and a per-class histogram",
    "run": "run the paradigm x clients x permutation matrix",
    "report": "render SVG plots and a correlation table from a results directory",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftbench", description="Measure how membership leakage drifts over incremental training.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("partition", "run"):
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("config", help="experiment config (.json or .toml)")
        p.add_argument("--seed-override", type=int, default=None, help="replace every seed in the config")
        p.add_argument("--out-dir", default=None, help="override output_dir from the config")
        if name == "run":
            p.add_argument("--jobs", type=int, default=1, help="parallel matrix cells")

    p = sub.add_parser("report", help=_HELP["report"])
    p.add_argument("results_dir")
    p.add_argument("--out-dir", default=None, help="where to write SVGs (default: <results_dir>/plots)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "partition":
            for kind, path in cmd_partition(_effective_config(args)).items():
                print(f"{kind}: {path}")
            return 0
        if args.command == "run":
            return cmd_run(_effective_config(args), jobs=args.jobs)
        cmd_report(args.results_dir, args.out_dir)
        return 0
    except DriftBenchError as exc:
        print(f"driftbench: error: {exc}", file=sys.stderr)
        return 2
