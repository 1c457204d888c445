import inspect
import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from driftbench import attack
from driftbench.attack import (
    MIARecord,
    build_eval_records,
    build_matched_records,
    mia_score,
    mia_scores,
    records_from_csv,
    records_to_csv,
    roc_auc,
    roc_auc_trapezoid,
)
from driftbench.data import LabeledExample
from driftbench.errors import DataError, EvaluationError
from driftbench.model import ArchitectureSpec, init_model

from test_model import logits_model, model_with


def pair_count_auc(members, nonmembers):
    """Brute-force oracle: every (member, non-member) pair, ties worth half."""
    total = 0.0
    for m, n in itertools.product(members, nonmembers):
        total += 1.0 if m > n else 0.5 if m == n else 0.0
    return total / (len(members) * len(nonmembers))


def recs(members, nonmembers):
    out = [MIARecord(i, s, True) for i, s in enumerate(members)]
    out += [MIARecord(100 + i, s, False) for i, s in enumerate(nonmembers)]
    return out


# --- mia_score ------------------------------------------------------------------------


def test_untrained_uniform_model_scores_quarter():
    m = logits_model([0.0] * 4)
    for label in range(4):
        assert mia_score(m, LabeledExample(0, np.zeros(1), label)) == 0.25


def test_one_hot_model_saturates():
    m = model_with([(np.eye(3) * 1e4, np.zeros(3))])
    for label in range(3):
        assert mia_score(m, LabeledExample(label, np.eye(3)[label], label)) == 1.0


def test_score_matches_softmax_oracle():
    m = init_model(ArchitectureSpec(3, (5,), 4), seed=1)
    x = np.array([0.3, -1.2, 2.0])
    h = np.maximum(x @ m.params[0][0] + m.params[0][1], 0)
    logits = h @ m.params[1][0] + m.params[1][1]
    with mpmath.workdps(40):
        e = [mpmath.exp(mpmath.mpf(float(z))) for z in logits]
        expected = float(e[2] / mpmath.fsum(e))
    assert abs(mia_score(m, LabeledExample(0, x, 2)) - expected) <= 1e-12


def test_score_label_out_of_range():
    with pytest.raises(DataError):
        mia_score(logits_model([0.0, 0.0]), LabeledExample(0, np.zeros(1), 2))


def test_batched_scores_agree_with_single_queries(blobs):
    m = init_model(ArchitectureSpec(5, (6,), 4), seed=3)
    ids = blobs.ids[:12].tolist()
    single = [mia_score(m, blobs.example(i)) for i in ids]
    np.testing.assert_allclose(mia_scores(m, blobs, ids), single, rtol=0, atol=1e-15)


def test_attack_module_never_reads_parameters_or_gradients():
    src = inspect.getsource(attack)
    for forbidden in (".params", "flat_params", "loss_and_gradients", "optimizer_state", "forward("):
        assert forbidden not in src


# --- build_eval_records ---------------------------------------------------------------


def test_eval_records_counts(blobs):
    m = init_model(ArchitectureSpec(5, (), 4), 0)
    r = build_eval_records(m, blobs, range(0, 20), range(20, 40), 3, seed=1)
    assert len(r) == 6
    assert sum(x.is_member for x in r) == 3
    assert {x.example_id for x in r if x.is_member} <= set(range(20))


def test_eval_records_overlap_and_empty(blobs):
    m = init_model(ArchitectureSpec(5, (), 4), 0)
    with pytest.raises(EvaluationError):
        build_eval_records(m, blobs, [1, 2, 3], [3, 4, 5], 1, seed=0)
    with pytest.raises(EvaluationError):
        build_eval_records(m, blobs, [], [3, 4, 5], 1, seed=0)
    with pytest.raises(EvaluationError):
        build_eval_records(m, blobs, [1, 2], [3, 4, 5], 3, seed=0)


def test_eval_records_deterministic(blobs):
    m = init_model(ArchitectureSpec(5, (), 4), 0)
    a = build_eval_records(m, blobs, range(0, 50), range(50, 100), 10, seed=5)
    b = build_eval_records(m, blobs, range(0, 50), range(50, 100), 10, seed=5)
    assert a == b


def test_matched_records_share_class_histogram(blobs):
    m = init_model(ArchitectureSpec(5, (), 4), 0)
    members = [i for i in blobs.ids.tolist() if blobs.labels[i] in (0, 1)][:50] + [int(np.flatnonzero(blobs.labels == 2)[0])]
    nonmembers = [i for i in blobs.ids.tolist() if i not in members]
    r = build_matched_records(m, blobs, members, nonmembers, cap=1000, seed=0)
    hist = lambda flag: np.bincount([blobs.labels[x.example_id] for x in r if x.is_member == flag], minlength=4)
    assert np.array_equal(hist(True), hist(False))
    assert hist(True)[3] == 0 and hist(True)[2] == 1
    capped = build_matched_records(m, blobs, members, nonmembers, cap=7, seed=0)
    assert sum(x.is_member for x in capped) <= 7


# --- roc_auc ---------------------------------------------------------------------------


def test_perfect_separation():
    assert roc_auc(recs([0.9, 0.8], [0.1, 0.2])).auc == 1.0


def test_all_ties_half():
    res = roc_auc(recs([0.3] * 4, [0.3] * 5))
    assert res.auc == 0.5 and res.tie_count == 20


def test_worked_example():
    res = roc_auc(recs([0.9, 0.4], [0.5, 0.1]))
    assert res.auc == 0.75
    assert pair_count_auc([0.9, 0.4], [0.5, 0.1]) == 0.75
    assert (res.num_members, res.num_nonmembers, res.tie_count) == (2, 2, 0)


def test_single_class_records_rejected():
    with pytest.raises(EvaluationError):
        roc_auc(recs([0.1, 0.2], []))


scores = st.lists(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1), min_size=1, max_size=25)


@settings(max_examples=300, deadline=None)
@given(scores, scores)
def test_pairwise_trapezoid_and_oracle_agree(m, n):
    r = recs(m, n)
    expected = pair_count_auc(m, n)
    assert abs(roc_auc(r).auc - expected) <= 1e-12
    assert abs(roc_auc_trapezoid(r) - expected) <= 1e-12


@given(scores, scores)
def test_monotone_transform_invariance(m, n):
    # strictly increasing by construction; arithmetic transforms can merge nearby floats
    table = {v: np.exp(k / 3.0) - 7.0 for k, v in enumerate(sorted(set(m) | set(n)))}
    f = table.__getitem__
    assert roc_auc(recs(m, n)).auc == roc_auc(recs([f(s) for s in m], [f(s) for s in n])).auc


@given(scores, scores)
def test_label_flip_symmetry(m, n):
    r = recs(m, n)
    flipped = [MIARecord(x.example_id, x.score, not x.is_member) for x in r]
    assert abs(roc_auc(flipped).auc - (1.0 - roc_auc(r).auc)) <= 1e-12


def test_records_csv_round_trip():
    r = recs([0.1, 1 / 3], [2 / 7])
    text = records_to_csv(r)
    assert text.splitlines()[0] == "example_id,score,is_member"
    assert records_from_csv(text) == r
