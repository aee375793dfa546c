import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from structhash import measures
from structhash.data import QueryNeighborhood
from structhash.measures import (
    Interleaving,
    MeasureSpec,
    UndefinedMeasureError,
    label_loss,
    ndcg_gain,
    score,
    score_auc,
    score_map,
    score_ndcg,
    score_precision_at_k,
    true_ranking,
)

S3 = 1 / math.log2(3)


def gt_of(rel, irr):
    return QueryNeighborhood(0, rel, irr)


@st.composite
def ranked(draw, max_rel=6, max_irr=6):
    p = draw(st.integers(1, max_rel))
    q = draw(st.integers(1, max_irr))
    order = draw(st.permutations(list(range(1, p + q + 1))))
    return gt_of(list(range(1, p + 1)), list(range(p + 1, p + q + 1))), order


def auc_by_pairs(order, gt):
    pos = {idx: r for r, idx in enumerate(order)}
    good = sum(pos[j] < pos[k] for j in gt.relevant for k in gt.irrelevant)
    return good / (gt.relevant.size * gt.irrelevant.size)


def test_auc_examples():
    gt = gt_of([1], [2])
    assert score_auc([1, 2], gt) == 1.0
    assert score_auc([2, 1], gt) == 0.0
    assert score_auc([1, 3, 2, 4], gt_of([1, 2], [3, 4])) == pytest.approx(3 / 4, abs=1e-12)


def test_precision_examples():
    gt = gt_of([1, 2], [3, 4])
    assert score_precision_at_k([1, 3, 2, 4], gt, 2) == 0.5
    assert score_precision_at_k([1, 2, 3, 4], gt, 2) == 1.0
    assert score_precision_at_k([3, 1, 2, 4], gt, 3) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        score_precision_at_k([1, 2, 3, 4], gt, 5)


def test_ndcg_gain_values():
    assert ndcg_gain(1, 5) == 1.0
    assert ndcg_gain(2, 5) == 1.0
    assert ndcg_gain(4, 5) == 0.5
    assert ndcg_gain(6, 5) == 0.0
    with pytest.raises(ValueError):
        ndcg_gain(0, 5)


def test_ndcg_examples():
    gt = gt_of([1, 2], [3, 4])
    assert score_ndcg([2, 1, 4, 3], gt, 3) == 1.0
    assert score_ndcg([1, 3, 2, 4], gt, 3) == pytest.approx((1 + S3) / 2, abs=1e-9)
    assert score_ndcg([1, 3, 2, 4], gt, 3) == pytest.approx(0.8155, abs=5e-5)
    lit = score_ndcg([1, 3, 2, 4], gt, 3, "literal")
    assert lit == pytest.approx((1 + S3) / (2 + S3), abs=1e-9)
    assert lit == pytest.approx(0.6199, abs=5e-5)


def test_map_examples():
    gt = gt_of([1, 2], [3, 4])
    assert score_map([1, 2, 3, 4], gt) == 1.0
    assert score_map([1, 3, 2, 4], gt) == pytest.approx(5 / 6, abs=1e-12)
    assert score_map([2, 3, 1], gt_of([1], [2, 3])) == pytest.approx(1 / 3)


def test_label_loss_examples():
    gt = gt_of([1, 2], [3, 4])
    yt = true_ranking(gt)
    for spec in (MeasureSpec("auc"), MeasureSpec("pak", 2), MeasureSpec("ndcg", 3), MeasureSpec("map")):
        assert label_loss(spec, yt, yt, gt) == 0.0
    assert label_loss(MeasureSpec("auc"), yt, yt.reversed(), gt) == 1.0
    assert label_loss(MeasureSpec("ndcg", 3), yt, [1, 3, 2, 4], gt) == pytest.approx(1 - (1 + S3) / 2)
    with pytest.raises(ValueError, match="relevant item first"):
        label_loss(MeasureSpec("auc"), [3, 1, 2, 4], [1, 2, 3, 4], gt)


def test_undefined_measures():
    with pytest.raises(UndefinedMeasureError):
        score_auc([1, 2], gt_of([], [1, 2]))
    with pytest.raises(UndefinedMeasureError):
        score_auc([1, 2], gt_of([1, 2], []))
    with pytest.raises(UndefinedMeasureError):
        score_map([1], gt_of([], [1]))


def test_measure_spec_validation():
    with pytest.raises(ValueError):
        MeasureSpec("bleu")
    with pytest.raises(ValueError):
        MeasureSpec("ndcg")
    with pytest.raises(ValueError):
        MeasureSpec("ndcg", 3, "other")
    assert hash(MeasureSpec("map")) == hash(MeasureSpec("map"))


def test_interleaving_helpers():
    y = Interleaving([4, 2, 7])
    assert y.positions() == {4: 1, 2: 2, 7: 3}
    assert y.reversed().order == (7, 2, 4)
    assert len(y) == 3


@given(ranked())
def test_auc_matches_pair_enumeration(case):
    gt, order = case
    assert score_auc(order, gt) == pytest.approx(auc_by_pairs(order, gt), abs=1e-12)


@given(ranked())
def test_auc_reversal(case):
    gt, order = case
    assert score_auc(order[::-1], gt) == pytest.approx(1 - score_auc(order, gt), abs=1e-12)


@given(ranked(), st.integers(1, 6))
def test_scores_in_unit_interval(case, k):
    gt, order = case
    k = min(k, len(order))
    for spec in (MeasureSpec("auc"), MeasureSpec("pak", k), MeasureSpec("ndcg", k),
                 MeasureSpec("ndcg", k, "literal"), MeasureSpec("map")):
        assert 0.0 <= score(spec, order, gt) <= 1.0


@given(ranked(), st.integers(1, 6))
def test_true_ranking_is_optimal(case, k):
    gt, order = case
    yt = true_ranking(gt)
    k = min(k, len(order))
    for spec in (MeasureSpec("auc"), MeasureSpec("pak", k), MeasureSpec("ndcg", k),
                 MeasureSpec("ndcg", k, "literal"), MeasureSpec("map")):
        assert score(spec, yt, gt) >= score(spec, order, gt) - 1e-12


@given(ranked(), st.integers(1, 6))
def test_ndcg_matches_direct_sum(case, k):
    gt, order = case
    rel = set(gt.relevant.tolist())

    def s(i):
        return 0.0 if i > k else (1.0 if i == 1 else 1 / math.log2(i))

    gain = sum(s(i) for i, idx in enumerate(order, 1) if idx in rel)
    ideal = sum(s(i) for i in range(1, min(k, len(rel)) + 1))
    assert score_ndcg(order, gt, k) == pytest.approx(gain / ideal, abs=1e-12)
    assert score_ndcg(order, gt, k, "literal") == pytest.approx(gain / sum(s(i) for i in range(1, k + 1)), abs=1e-12)


@given(ranked())
def test_map_matches_definition(case):
    gt, order = case
    rel = set(gt.relevant.tolist())
    precs = []
    for i, idx in enumerate(order, 1):
        if idx in rel:
            precs.append(sum(o in rel for o in order[:i]) / i)
    assert score_map(order, gt) == pytest.approx(np.mean(precs), abs=1e-12)


def test_score_ndcg_reads_gain_at_call_time(monkeypatch):
    gt = gt_of([1, 2], [3, 4])
    monkeypatch.setattr(measures, "ndcg_gain", lambda i, k: 1.0 if i <= k else 0.0)
    assert score_ndcg([1, 3, 2, 4], gt, 3) == 1.0
