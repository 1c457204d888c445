"""Correlation and drift statistics over per-phase metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateSeriesError, DriftBenchError
from .schedule import NUM_PHASES, PhaseMetrics, PhasePlan

CSV_HEADER = ("paradigm", "clients", "permutation", "phase", "train_acc", "test_acc", "mia_auc")


def pearson(x, y) -> float:
    """Sample Pearson correlation, clamped to [-1, 1].

    Raises DegenerateSeriesError when either series is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("pearson needs two 1-d series of equal length >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateSeriesError("zero variance series")
    dx = x - math.fsum(x) / len(x)
    dy = y - math.fsum(y) / len(y)
    r = math.fsum(dx * dy) / math.sqrt(math.fsum(dx * dx) * math.fsum(dy * dy))
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class DriftDelta:
    phase_index: int
    delta_auc: float
    delta_train_acc: float


def drift_deltas(metrics: Sequence[PhaseMetrics]) -> List[DriftDelta]:
    if len(metrics) < 2:
        raise ValueError("drift deltas need at least two phases")
    return [
        DriftDelta(b.phase_index, b.mia_auc - a.mia_auc, b.train_accuracy - a.train_accuracy)
        for a, b in zip(metrics, metrics[1:])
    ]


@dataclass(frozen=True)
class FiveNumber:
    min: float
    q1: float
    median: float
    q3: float
    max: float


def five_number(values) -> FiveNumber:
    """Min, quartiles and max; quartiles interpolate linearly between order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if not len(v):
        raise ValueError("five-number summary of an empty sample")
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return FiveNumber(*(float(t) for t in q))


@dataclass
class PermutationResult:
    plan: PhasePlan
    metrics: List[PhaseMetrics]
    pearson_train_auc: Optional[float]
    deltas: List[DriftDelta] = field(default_factory=list)


@dataclass
class DriftReport:
    config_digest: str
    paradigm: str
    client_count: int
    permutations: List[PermutationResult]
    phase_means: List[Dict[str, float]]
    correlation_summary: Optional[FiveNumber]
    degenerate_count: int
    pooled_pearson: Optional[float]

    @property
    def pearson_values(self) -> List[float]:
        return [p.pearson_train_auc for p in self.permutations if p.pearson_train_auc is not None]

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "paradigm": self.paradigm,
            "client_count": self.client_count,
            "permutations": [
                {
                    "permutation": p.plan.label,
                    "pearson_train_auc": p.pearson_train_auc,
                    "phases": [asdict(m) for m in p.metrics],
                    "deltas": [asdict(d) for d in p.deltas],
                }
                for p in self.permutations
            ],
            "phase_means": self.phase_means,
            "correlation_summary": asdict(self.correlation_summary) if self.correlation_summary else None,
            "degenerate_count": self.degenerate_count,
            "pooled_pearson": self.pooled_pearson,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "DriftReport":
        perms = []
        for p in doc["permutations"]:
            plan = PhasePlan(tuple(p["permutation"]), doc["paradigm"])
            metrics = [PhaseMetrics(**m) for m in p["phases"]]
            deltas = [DriftDelta(**d) for d in p.get("deltas", [])]
            perms.append(PermutationResult(plan, metrics, p["pearson_train_auc"], deltas))
        summary = doc.get("correlation_summary")
        return cls(
            config_digest=doc["config_digest"],
            paradigm=doc["paradigm"],
            client_count=int(doc["client_count"]),
            permutations=perms,
            phase_means=doc["phase_means"],
            correlation_summary=FiveNumber(**summary) if summary else None,
            degenerate_count=int(doc["degenerate_count"]),
            pooled_pearson=doc.get("pooled_pearson"),
        )

    @classmethod
    def from_json(cls, text: str) -> "DriftReport":
        return cls.from_dict(json.loads(text))


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def aggregate(results: Sequence[Tuple[PhasePlan, Sequence[PhaseMetrics]]], client_count: int,
              config_digest: str = "") -> DriftReport:
    """Cross-permutation summary for one (paradigm, client count) cell of the matrix.

    Results are put in canonical permutation order first, so the report does
    not depend on the order they were supplied in. A permutation whose
    accuracy or AUC series is constant gets ``pearson_train_auc = None`` and
    is counted in ``degenerate_count`` instead of entering the summary.
    """
    if not results:
        raise ValueError("aggregate needs at least one permutation result")
    paradigms = {plan.paradigm for plan, _ in results}
    if len(paradigms) != 1:
        raise ValueError(f"results mix paradigms {sorted(paradigms)}")
    ordered = sorted(results, key=lambda r: r[0].permutation)
    perms = []
    for plan, metrics in ordered:
        if len(metrics) != NUM_PHASES:
            raise ValueError(f"permutation {plan.label} has {len(metrics)} phases, expected {NUM_PHASES}")
        try:
            r = pearson([m.train_accuracy for m in metrics], [m.mia_auc for m in metrics])
        except DegenerateSeriesError:
            r = None
        perms.append(PermutationResult(plan, list(metrics), r, drift_deltas(metrics)))

    phase_means = []
    for k in range(NUM_PHASES):
        col = [p.metrics[k] for p in perms]
        phase_means.append({
            "phase": k,
            "train_acc": _mean([m.train_accuracy for m in col]),
            "test_acc": _mean([m.test_accuracy for m in col]),
            "mia_auc": _mean([m.mia_auc for m in col]),
        })
    values = [p.pearson_train_auc for p in perms if p.pearson_train_auc is not None]
    try:
        pooled = pearson([m.train_accuracy for p in perms for m in p.metrics],
                         [m.mia_auc for p in perms for m in p.metrics])
    except DegenerateSeriesError:
        pooled = None
    return DriftReport(
        config_digest=config_digest,
        paradigm=paradigms.pop(),
        client_count=int(client_count),
        permutations=perms,
        phase_means=phase_means,
        correlation_summary=five_number(values) if values else None,
        degenerate_count=len(perms) - len(values),
        pooled_pearson=pooled,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def metrics_csv_rows(paradigm: str, clients: int, plan: PhasePlan, metrics: Sequence[PhaseMetrics]):
    for m in metrics:
        yield (paradigm, str(clients), plan.label, str(m.phase_index),
               _fmt(m.train_accuracy), _fmt(m.test_accuracy), _fmt(m.mia_auc))


def report_to_csv(report: DriftReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in report.permutations:
        w.writerows(metrics_csv_rows(report.paradigm, report.client_count, p.plan, p.metrics))
    return buf.getvalue()
