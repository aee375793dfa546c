"""Ranking scores (AUC, precision-at-K, NDCG, mAP) and the label loss ``1 - score``.

A ranking is any sequence of example indices, or an :class:`Interleaving`.
Positions are 1-based. Relevance is binary and taken from a
:class:`~structhash.data.QueryNeighborhood`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MEASURES = ("auc", "pak", "ndcg", "map")


class UndefinedMeasureError(ValueError):
    """The measure is undefined for this neighbourhood (an empty side)."""


@dataclass(frozen=True)
class Interleaving:
    order: tuple

    def __init__(self, order):
        object.__setattr__(self, "order", tuple(int(i) for i in order))

    def __len__(self):
        return len(self.order)

    def positions(self) -> dict:
        return {idx: pos for pos, idx in enumerate(self.order, start=1)}

    def reversed(self) -> "Interleaving":
        return Interleaving(self.order[::-1])


@dataclass(frozen=True)
class MeasureSpec:
    """Which measure to optimise.

    ``kind`` is one of ``auc``, ``pak``, ``ndcg``, ``map``. ``k`` is the
    cutoff for ``pak`` and ``ndcg``. ``ndcg_normalizer`` is ``"ideal"``
    (divide by the best attainable gain, so a perfect ranking has zero loss)
    or ``"literal"`` (always divide by the gain of K relevant items).
    """

    kind: str
    k: int | None = None
    ndcg_normalizer: str = "ideal"

    def __post_init__(self):
        if self.kind not in MEASURES:
            raise ValueError(f"unknown measure {self.kind!r}; choose from {MEASURES}")
        if self.kind in ("pak", "ndcg") and (self.k is None or self.k < 1):
            raise ValueError(f"{self.kind} needs a cutoff k >= 1")
        if self.ndcg_normalizer not in ("ideal", "literal"):
            raise ValueError(f"unknown NDCG normalizer {self.ndcg_normalizer!r}")


def _order(y) -> list:
    return list(y.order) if isinstance(y, Interleaving) else [int(i) for i in y]


def _relevance(y, gt) -> np.ndarray:
    rel = set(gt.relevant.tolist())
    return np.array([idx in rel for idx in _order(y)], dtype=bool)


def _require_relevant(gt):
    if gt.relevant.size == 0:
        raise UndefinedMeasureError(f"query {gt.query}: no relevant items")


def score_auc(y, gt) -> float:
    """Fraction of (relevant, irrelevant) pairs with the relevant item first."""
    _require_relevant(gt)
    if gt.irrelevant.size == 0:
        raise UndefinedMeasureError(f"query {gt.query}: no irrelevant items")
    is_rel = _relevance(y, gt)
    # each relevant item is correctly ordered against the irrelevant items after it
    irr_after = np.cumsum((~is_rel)[::-1])[::-1]
    correct = int(irr_after[is_rel].sum())
    return correct / (gt.relevant.size * gt.irrelevant.size)


def score_precision_at_k(y, gt, k: int) -> float:
    is_rel = _relevance(y, gt)
    if k < 1 or k > is_rel.size:
        raise ValueError(f"K={k} outside 1..{is_rel.size}")
    return int(is_rel[:k].sum()) / k


def ndcg_gain(i: int, k: int) -> float:
    """Position discount: 1 at position 1, ``1/log2(i)`` up to K, 0 beyond."""
    if i < 1:
        raise ValueError("positions are 1-based")
    if i > k:
        return 0.0
    if i == 1:
        return 1.0
    return 1.0 / math.log2(i)


def ndcg_normalizer(k: int, n_relevant: int, mode: str = "ideal") -> float:
    depth = k if mode == "literal" else min(k, n_relevant)
    return sum(ndcg_gain(i, k) for i in range(1, depth + 1))


def score_ndcg(y, gt, k: int, normalizer: str = "ideal") -> float:
    _require_relevant(gt)
    is_rel = _relevance(y, gt)
    gain = sum(ndcg_gain(pos, k) for pos in range(1, min(k, is_rel.size) + 1) if is_rel[pos - 1])
    return gain / ndcg_normalizer(k, gt.relevant.size, normalizer)


def score_map(y, gt) -> float:
    """Average of precision-at-i over the positions i holding relevant items."""
    _require_relevant(gt)
    is_rel = _relevance(y, gt)
    hits = np.cumsum(is_rel)
    pos = np.arange(1, is_rel.size + 1)
    return float((hits[is_rel] / pos[is_rel]).sum() / gt.relevant.size)


def score(spec: MeasureSpec, y, gt) -> float:
    if spec.kind == "auc":
        return score_auc(y, gt)
    if spec.kind == "pak":
        return score_precision_at_k(y, gt, spec.k)
    if spec.kind == "ndcg":
        return score_ndcg(y, gt, spec.k, spec.ndcg_normalizer)
    return score_map(y, gt)


def true_ranking(gt) -> Interleaving:
    """The ground-truth ranking: relevant items (ascending index) then irrelevant."""
    return Interleaving(np.concatenate([np.sort(gt.relevant), np.sort(gt.irrelevant)]))


def label_loss(spec: MeasureSpec, y_true, y, gt) -> float:
    """``1 - score(y)``.

    ``y_true`` only has to be consistent with ``gt``; with binary relevance
    every such ranking scores the same, so it does not enter the value.
    """
    head = _relevance(y_true, gt)[: gt.relevant.size]
    if not head.all():
        raise ValueError("y_true must rank every relevant item first")
    return 1.0 - score(spec, y, gt)
