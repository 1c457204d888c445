import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from driftbench.errors import DegenerateSeriesError
from driftbench.metrics import (
    CSV_HEADER,
    DriftReport,
    aggregate,
    drift_deltas,
    five_number,
    pearson,
    report_to_csv,
)
from driftbench.schedule import PhaseMetrics, PhasePlan, enumerate_permutations


def pearson_oracle(x, y):
    with mpmath.workdps(60):
        x = [mpmath.mpf(float(v)) for v in x]
        y = [mpmath.mpf(float(v)) for v in y]
        mx, my = mpmath.fsum(x) / len(x), mpmath.fsum(y) / len(y)
        cov = mpmath.fsum((a - mx) * (b - my) for a, b in zip(x, y))
        sx = mpmath.sqrt(mpmath.fsum((a - mx) ** 2 for a in x))
        sy = mpmath.sqrt(mpmath.fsum((b - my) ** 2 for b in y))
        return float(cov / (sx * sy))


def phases(train, auc, test=None):
    test = test or [0.5] * len(train)
    return [PhaseMetrics(k, t, s, a, 10, 10) for k, (t, s, a) in enumerate(zip(train, test, auc))]


def series_with_correlation(r):
    """Four-point (train, auc) series whose Pearson correlation is r."""
    x = np.array([1.0, -1.0, 0.0, 0.0])
    z = np.array([0.0, 0.0, 1.0, -1.0])
    y = r * x + math.sqrt(1 - r * r) * z
    return list(0.5 + 0.1 * x), list(0.5 + 0.1 * y)


# --- pearson ---------------------------------------------------------------------------


def test_pearson_fixtures():
    assert pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(pearson([1, 2, 3, 4], [1, 3, 2, 5]) - pearson_oracle([1, 2, 3, 4], [1, 3, 2, 5])) <= 1e-12


def test_pearson_random_series_match_oracle():
    rng = random.Random(0)
    for _ in range(50):
        n = rng.randint(2, 40)
        x = [rng.uniform(-5, 5) for _ in range(n)]
        y = [rng.uniform(-5, 5) for _ in range(n)]
        assert abs(pearson(x, y) - pearson_oracle(x, y)) <= 1e-12


def test_pearson_degenerate():
    with pytest.raises(DegenerateSeriesError):
        pearson([0.7, 0.7, 0.7], [1, 2, 3])
    with pytest.raises(DegenerateSeriesError):
        pearson([1, 2, 3], [4, 4, 4])
    with pytest.raises(ValueError):
        pearson([1], [2])


finite = st.floats(-100, 100, allow_nan=False)


@settings(max_examples=200)
@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=20),
       st.floats(0.1, 10), st.floats(-10, 10))
def test_pearson_symmetry_and_affine_invariance(pts, scale, shift):
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    assume(np.ptp(x) > 1e-3 and np.ptp(y) > 1e-3)
    r = pearson(x, y)
    assert -1.0 <= r <= 1.0
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson(scale * x + shift, y) == pytest.approx(r, abs=1e-12)


# --- drift deltas ------------------------------------------------------------------------


def test_deltas_constant_and_definitional():
    assert all(d.delta_auc == 0 for d in drift_deltas(phases([0.1, 0.2, 0.3, 0.4], [0.6] * 4)))
    d = drift_deltas(phases([0.1] * 4, [0.5, 0.6, 0.55, 0.7]))
    assert [x.phase_index for x in d] == [1, 2, 3]
    np.testing.assert_allclose([x.delta_auc for x in d], [0.1, -0.05, 0.15], atol=1e-12)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_deltas_telescope(aucs):
    d = drift_deltas(phases([0.0] * len(aucs), aucs))
    assert abs(sum(x.delta_auc for x in d) - (aucs[-1] - aucs[0])) <= 1e-12


def test_deltas_need_two_phases():
    with pytest.raises(ValueError):
        drift_deltas(phases([0.1], [0.5]))


# --- five-number summary and aggregate ----------------------------------------------------


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=30))
def test_quantile_sandwich(values):
    s = five_number(values)
    assert s.min <= s.q1 <= s.median <= s.q3 <= s.max


def test_type7_quartiles():
    s = five_number([0.1 * k for k in range(1, 9)])
    assert s.median == pytest.approx(0.45, abs=1e-15)
    assert s.q1 == pytest.approx(0.275, abs=1e-15)
    assert s.q3 == pytest.approx(0.625, abs=1e-15)


def test_aggregate_singleton():
    train, auc = [0.5, 0.7, 0.6, 0.9], [0.52, 0.6, 0.55, 0.7]
    plan = PhasePlan(("A", "B", "C", "D"))
    rep = aggregate([(plan, phases(train, auc))], client_count=1)
    assert [m["train_acc"] for m in rep.phase_means] == train
    assert [m["mia_auc"] for m in rep.phase_means] == auc
    r = pearson(train, auc)
    s = rep.correlation_summary
    assert s.min == s.q1 == s.median == s.q3 == s.max == r
    assert rep.degenerate_count == 0


def eight_permutation_results(values, paradigm="uniform"):
    out = []
    for perm, r in zip(enumerate_permutations(8, seed=0), values):
        train, auc = series_with_correlation(r)
        out.append((PhasePlan(perm, paradigm), phases(train, auc)))
    return out


def test_aggregate_median_of_eight():
    rep = aggregate(eight_permutation_results([0.1 * k for k in range(1, 9)]), client_count=2)
    assert rep.correlation_summary.median == pytest.approx(0.45, abs=1e-12)
    assert sorted(rep.pearson_values) == pytest.approx([0.1 * k for k in range(1, 9)], abs=1e-12)


def test_aggregate_ignores_input_order():
    res = eight_permutation_results([0.9, -0.2, 0.4, 0.33, 0.1, 0.8, 0.05, 0.6])
    a = aggregate(res, 5, "abc")
    b = aggregate(list(reversed(res)), 5, "abc")
    c = aggregate(res[3:] + res[:3], 5, "abc")
    assert a.to_json() == b.to_json() == c.to_json()


def test_aggregate_constant_series_mean():
    res = [(PhasePlan(p), phases([0.3] * 4, [0.6, 0.5, 0.7, 0.6])) for p in enumerate_permutations(3, 1)]
    rep = aggregate(res, 1)
    assert all(m["train_acc"] == 0.3 for m in rep.phase_means)
    assert rep.degenerate_count == 3
    assert rep.correlation_summary is None
    assert all(p.pearson_train_auc is None for p in rep.permutations)


def test_aggregate_excludes_degenerate_permutation_only():
    res = eight_permutation_results([0.5] * 8)
    plan = res[0][0]
    res[0] = (plan, phases([0.4] * 4, [0.5, 0.6, 0.5, 0.6]))
    rep = aggregate(res, 1)
    assert rep.degenerate_count == 1
    assert len(rep.pearson_values) == 7


def test_aggregate_rejects_mixed_paradigms():
    res = eight_permutation_results([0.5] * 2) + eight_permutation_results([0.5] * 2, "additive")
    with pytest.raises(ValueError):
        aggregate(res, 1)


def test_report_json_round_trip_and_csv():
    rep = aggregate(eight_permutation_results([0.1 * k for k in range(1, 9)]), 2, "digest")
    back = DriftReport.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    lines = report_to_csv(rep).splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 1 + 8 * 4
    assert lines[1].startswith("uniform,2,")
