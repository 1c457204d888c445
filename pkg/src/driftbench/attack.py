"""Membership inference through confidence queries, scored by ROC AUC.

The attacker sees a model only through :func:`driftbench.model.predict_confidences`
(and its batched twin). Nothing here touches parameters or gradients.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DataError, EvaluationError
from .model import predict_confidences, predict_confidences_batch


@dataclass(frozen=True)
class MIARecord:
    example_id: int
    score: float
    is_member: bool


@dataclass(frozen=True)
class AucResult:
    auc: float
    num_members: int
    num_nonmembers: int
    tie_count: int


def mia_score(model, example) -> float:
    """Confidence the model assigns to the example's true label."""
    if not 0 <= example.label < model.arch.num_classes:
        raise DataError(f"label {example.label} out of range for {model.arch.num_classes} classes")
    return float(predict_confidences(model, example.features)[example.label])


def mia_scores(model, dataset, ids) -> np.ndarray:
    """Batched :func:`mia_score` over ``ids`` of ``dataset``; same query surface, one call."""
    sub = dataset.subset(ids)
    if not len(sub):
        return np.zeros(0)
    if sub.labels.max() >= model.arch.num_classes:
        raise DataError("example label out of range for the model")
    conf = predict_confidences_batch(model, sub.features)
    return conf[np.arange(len(sub)), sub.labels]


def build_eval_records(model, dataset, member_ids, nonmember_ids, per_side: int,
                       seed: int) -> List[MIARecord]:
    """Balanced, seeded sample of ``per_side`` members and ``per_side`` non-members, scored."""
    members = sorted(int(i) for i in member_ids)
    nonmembers = sorted(int(i) for i in nonmember_ids)
    if not members or not nonmembers:
        raise EvaluationError("member and non-member pools must both be nonempty")
    if set(members) & set(nonmembers):
        raise EvaluationError("member and non-member pools overlap")
    if not 1 <= per_side <= min(len(members), len(nonmembers)):
        raise EvaluationError(
            f"per_side={per_side} must lie in [1, {min(len(members), len(nonmembers))}]"
        )
    rng = np.random.default_rng(seed)
    picked_m = sorted(np.asarray(members)[rng.choice(len(members), per_side, replace=False)].tolist())
    picked_n = sorted(np.asarray(nonmembers)[rng.choice(len(nonmembers), per_side, replace=False)].tolist())
    records = []
    for ids, flag in ((picked_m, True), (picked_n, False)):
        scores = mia_scores(model, dataset, ids)
        records.extend(MIARecord(int(i), float(s), flag) for i, s in zip(ids, scores))
    return records


def class_matched_quota(member_labels, nonmember_labels, num_classes: int, cap: int) -> np.ndarray:
    """Per-class sample size ``min(members_c, nonmembers_c)``, scaled down to at most ``cap`` in total."""
    m = np.bincount(np.asarray(member_labels, dtype=np.int64), minlength=num_classes)
    n = np.bincount(np.asarray(nonmember_labels, dtype=np.int64), minlength=num_classes)
    quota = np.minimum(m, n)
    if quota.sum() > cap:
        from .data import largest_remainder
        quota = np.minimum(largest_remainder(quota, cap), quota)
    return quota


def build_matched_records(model, dataset, member_ids, nonmember_ids, cap: int,
                          seed: int) -> List[MIARecord]:
    """Balanced records whose member and non-member halves share one class histogram.

    For every class the same number of members and non-members is drawn, so
    class-dependent confidence (present even in an untrained model) cannot
    separate the two halves. Total per side is at most ``cap``.
    """
    members = sorted(int(i) for i in member_ids)
    nonmembers = sorted(int(i) for i in nonmember_ids)
    if not members or not nonmembers:
        raise EvaluationError("member and non-member pools must both be nonempty")
    if set(members) & set(nonmembers):
        raise EvaluationError("member and non-member pools overlap")
    ml = dataset.labels[dataset.rows(members)]
    nl = dataset.labels[dataset.rows(nonmembers)]
    quota = class_matched_quota(ml, nl, dataset.num_classes, cap)
    if quota.sum() == 0:
        raise EvaluationError("member and non-member pools share no class")
    rng = np.random.default_rng(seed)
    picked_m, picked_n = [], []
    for c in np.flatnonzero(quota):
        k = int(quota[c])
        for pool, labels, out in ((members, ml, picked_m), (nonmembers, nl, picked_n)):
            cand = np.asarray(pool)[labels == c]
            out.extend(cand[rng.choice(len(cand), k, replace=False)].tolist())
    records = []
    for ids, flag in ((sorted(picked_m), True), (sorted(picked_n), False)):
        scores = mia_scores(model, dataset, ids)
        records.extend(MIARecord(int(i), float(s), flag) for i, s in zip(ids, scores))
    return records


def _split_scores(records):
    m = np.array([r.score for r in records if r.is_member], dtype=np.float64)
    n = np.array([r.score for r in records if not r.is_member], dtype=np.float64)
    if not len(m) or not len(n):
        raise EvaluationError("AUC needs at least one member and one non-member record")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(n))):
        raise EvaluationError("scores must be finite")
    return m, n


def roc_auc(records: Sequence[MIARecord]) -> AucResult:
    """Mann-Whitney AUC: P(member score > non-member score) with ties counted half."""
    m, n = _split_scores(records)
    ns = np.sort(n)
    below = np.searchsorted(ns, m, side="left")
    at_or_below = np.searchsorted(ns, m, side="right")
    wins = int(below.sum())
    ties = int((at_or_below - below).sum())
    auc = (2 * wins + ties) / (2 * len(m) * len(n))
    return AucResult(float(auc), len(m), len(n), ties)


def roc_curve(records: Sequence[MIARecord]):
    """ROC points from a descending threshold sweep; tied scores move together.

    Returns ``(fpr, tpr)`` arrays starting at (0, 0) and ending at (1, 1).
    """
    m, n = _split_scores(records)
    scores = np.concatenate([m, n])
    member = np.concatenate([np.ones(len(m), bool), np.zeros(len(n), bool)])
    order = np.argsort(-scores, kind="stable")
    scores, member = scores[order], member[order]
    tp = np.cumsum(member)
    fp = np.cumsum(~member)
    last_of_group = np.r_[scores[1:] != scores[:-1], True]
    tpr = np.r_[0, tp[last_of_group]] / len(m)
    fpr = np.r_[0, fp[last_of_group]] / len(n)
    return fpr, tpr


def roc_auc_trapezoid(records: Sequence[MIARecord]) -> float:
    fpr, tpr = roc_curve(records)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def records_to_csv(records: Sequence[MIARecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["example_id", "score", "is_member"])
    for r in records:
        w.writerow([r.example_id, repr(float(r.score)), int(r.is_member)])
    return buf.getvalue()


def records_from_csv(text: str) -> List[MIARecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [MIARecord(int(r["example_id"]), float(r["score"]), r["is_member"] in ("1", "True", "true"))
            for r in rows]
