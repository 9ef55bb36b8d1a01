import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import auc_by_pair_enumeration, roc_by_threshold_sweep, trapezoid_area
from tabfusion.metrics import auc, bce, evaluate, format_report_table, roc_curve


def test_bce_symmetric_midpoint():
    assert bce([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2.0), abs=1e-12)


def test_bce_perfect_prediction_under_clipping():
    assert bce([1], [1.0 - 1e-12]) == pytest.approx(0.0, abs=1e-11)


def test_bce_quarter():
    assert bce([1], [0.25]) == pytest.approx(-math.log(0.25), abs=1e-12)


def test_bce_rejects_bad_input():
    with pytest.raises(ValueError):
        bce([], [])
    with pytest.raises(ValueError):
        bce([1, 0], [0.5])


def test_roc_perfect_separation_passes_corner():
    curve = roc_curve([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
    assert (0.0, 1.0) in curve.points
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)


def test_roc_all_scores_tied_is_diagonal():
    curve = roc_curve([0, 1, 0, 1], [0.5] * 4)
    assert curve.points == ((0.0, 0.0), (1.0, 1.0))


def test_roc_matches_threshold_sweep_oracle():
    y = [0, 0, 1, 1]
    s = [0.1, 0.4, 0.35, 0.8]
    assert list(roc_curve(y, s).points) == roc_by_threshold_sweep(y, s)


def test_auc_spot_values():
    assert auc([0, 1], [0.2, 0.9]) == 1.0
    assert auc([0, 1, 0, 1], [0.3] * 4) == 0.5
    # 3 of the 4 positive-negative pairs are concordant, none tied
    y = [0, 0, 1, 1]
    s = [0.1, 0.4, 0.35, 0.8]
    assert auc(y, s) == pytest.approx(0.75, abs=1e-12)
    assert auc(y, s) == pytest.approx(auc_by_pair_enumeration(y, s), abs=1e-12)


def test_single_class_rejected():
    with pytest.raises(ValueError):
        auc([1, 1], [0.2, 0.3])
    with pytest.raises(ValueError):
        roc_curve([0, 0], [0.2, 0.3])


@st.composite
def labeled_scores(draw):
    n = draw(st.integers(min_value=2, max_value=60))
    labels = draw(
        st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda ls: 0 < sum(ls) < len(ls))
    )
    # two-decimal rounding keeps tie groups stable under the monotone maps below
    scores = draw(
        st.lists(
            st.one_of(
                st.floats(min_value=-5.0, max_value=5.0, allow_nan=False).map(lambda x: round(x, 2)),
                st.integers(-3, 3).map(float),
            ),
            min_size=n,
            max_size=n,
        )
    )
    return np.array(labels), np.array(scores)


@given(labeled_scores())
@settings(max_examples=150, deadline=None)
def test_auc_equals_pair_enumeration(case):
    y, s = case
    assert auc(y, s) == pytest.approx(auc_by_pair_enumeration(y, s), abs=1e-12)


@given(labeled_scores())
@settings(deadline=None)
def test_auc_equals_trapezoidal_roc_area(case):
    y, s = case
    assert auc(y, s) == pytest.approx(trapezoid_area(roc_curve(y, s).points), abs=1e-12)


@given(labeled_scores())
@settings(deadline=None)
def test_auc_invariant_under_monotone_transforms(case):
    y, s = case
    base = auc(y, s)
    assert auc(y, np.exp(s)) == pytest.approx(base, abs=1e-12)
    assert auc(y, 3.0 * s - 7.0) == pytest.approx(base, abs=1e-12)


@given(labeled_scores())
@settings(deadline=None)
def test_auc_label_flip_symmetry(case):
    y, s = case
    assert auc(1 - y, s) == pytest.approx(1.0 - auc(y, s), abs=1e-12)


@given(labeled_scores())
@settings(deadline=None)
def test_roc_curve_is_monotone_with_exact_endpoints(case):
    y, s = case
    curve = roc_curve(y, s)
    fpr = [p[0] for p in curve.points]
    tpr = [p[1] for p in curve.points]
    assert all(a <= b for a, b in zip(fpr, fpr[1:]))
    assert all(a <= b for a, b in zip(tpr, tpr[1:]))
    assert curve.points[0] == (0.0, 0.0)
    assert curve.points[-1] == (1.0, 1.0)
    assert len(curve.thresholds) == len(curve.points)


@given(
    labeled_scores(),
    st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=60, max_size=60),
)
@settings(deadline=None)
def test_bce_is_minimized_at_the_labels(case, probs):
    y, _ = case
    p = np.array(probs[: y.size])
    assert bce(y, p) >= bce(y, y.astype(float)) - 1e-15


def test_evaluate_and_report_table():
    rep = evaluate("demo", [0, 1, 0, 1], [0.1, 0.8, 0.3, 0.9])
    assert rep.n == 4 and rep.positives == 2
    assert 0.0 <= rep.auc <= 1.0
    table = format_report_table([rep])
    assert "Model" in table and "demo" in table and "AUC" in table
