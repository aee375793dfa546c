"""Joint feature map and loss-augmented inference over rankings.

For a query ``i`` with relevant set P and irrelevant set N, the pair feature
is ``phi(i, u) = -|code_i - code_u|`` and the score of a candidate is
``s_u = w . phi(i, u)``. Inference returns the ranking maximising
``loss(y) - w . dpsi(y)`` where ``dpsi`` collects the inverted
(relevant, irrelevant) pairs of ``y``.

Within each class the optimal ranking orders items by descending score, so
only the interleaving pattern of the two classes has to be searched. AUC is
solved by a single sort (each pair decides independently); the
position-sensitive measures use a dynamic programme over states
``(relevant placed, irrelevant placed)``. :func:`brute_force_most_violated`
enumerates every permutation and is the reference both are tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import measures
from .measures import Interleaving, MeasureSpec

TIE_TOL = 1e-12


@dataclass(frozen=True)
class InferenceResult:
    ranking: Interleaving
    objective: float
    loss: float


def phi(code_i, code_j) -> np.ndarray:
    code_i = np.asarray(code_i, dtype=np.float64)
    code_j = np.asarray(code_j, dtype=np.float64)
    if code_i.shape != code_j.shape:
        raise ValueError(f"code length mismatch: {code_i.shape} vs {code_j.shape}")
    return -np.abs(code_i - code_j)


def inverted_pairs(y_true, y, gt) -> set:
    """Pairs ``(j, k)`` in P x N that ``y`` ranks k-before-j."""
    pos = Interleaving(getattr(y, "order", y)).positions()
    if set(pos) != set(Interleaving(getattr(y_true, "order", y_true)).order):
        raise ValueError("rankings cover different candidate sets")
    return {
        (int(j), int(k))
        for j in gt.relevant
        for k in gt.irrelevant
        if pos[int(k)] < pos[int(j)]
    }


def psi(y, codes, gt) -> np.ndarray:
    """Joint feature map: sum of ``y_jk (phi_ij - phi_ik) / (|P||N|)``."""
    codes = np.asarray(codes)
    pos = Interleaving(getattr(y, "order", y)).positions()
    qc = codes[gt.query]
    total = np.zeros(codes.shape[1])
    for j in gt.relevant:
        for k in gt.irrelevant:
            sign = 1.0 if pos[int(j)] < pos[int(k)] else -1.0
            total += sign * (phi(qc, codes[j]) - phi(qc, codes[k]))
    return total / (gt.relevant.size * gt.irrelevant.size)


def delta_psi(y, codes, gt) -> np.ndarray:
    """``psi(y_true) - psi(y)`` through the inverted pairs of ``y``."""
    codes = np.asarray(codes, dtype=np.float64)
    qc = codes[gt.query]
    pairs = inverted_pairs(measures.true_ranking(gt), y, gt)
    total = np.zeros(codes.shape[1])
    for j, k in pairs:
        total += np.abs(qc - codes[k]) - np.abs(qc - codes[j])
    return 2.0 * total / (gt.relevant.size * gt.irrelevant.size)


# ---------------------------------------------------------------------------
# batched inference


class QueryBatch:
    """Queries sharing the same ``(|P|, |N|)``, with cached code distances.

    ``d_rel[g, a]`` is ``|code_query - code_rel[a]|`` for the ``g``-th
    query. Rebuild the batch whenever a bit is added.
    """

    def __init__(self, codes, gts, members):
        codes = np.asarray(codes, dtype=np.float64)
        self.members = np.asarray(members, dtype=np.int64)
        self.anchors = np.array([gts[m].query for m in members], dtype=np.int64)
        self.rel = np.stack([np.sort(gts[m].relevant) for m in members])
        self.irr = np.stack([np.sort(gts[m].irrelevant) for m in members])
        qc = codes[self.anchors][:, None, :]
        self.d_rel = np.abs(qc - codes[self.rel])
        self.d_irr = np.abs(qc - codes[self.irr])

    @property
    def p(self) -> int:
        return self.rel.shape[1]

    @property
    def q(self) -> int:
        return self.irr.shape[1]

    def __len__(self):
        return self.members.size


def build_batches(codes, gts) -> list:
    groups: dict = {}
    for m, gt in enumerate(gts):
        if not gt.usable:
            raise ValueError(f"query {gt.query}: both neighbour sets must be non-empty")
        groups.setdefault((gt.relevant.size, gt.irrelevant.size), []).append(m)
    return [QueryBatch(codes, gts, members) for _, members in sorted(groups.items())]


@dataclass
class BatchResult:
    orders: np.ndarray  # (G, p+q) candidate indices
    objectives: np.ndarray
    losses: np.ndarray
    dpsi: np.ndarray  # (G, bits)


@lru_cache(maxsize=64)
def _placement_loss(spec: MeasureSpec, p: int, q: int):
    """Loss contribution of putting relevant item ``a`` after ``b`` irrelevant ones.

    Returns ``(const, table)`` with ``loss = const + sum table[a, b_a]``.
    """
    a = np.arange(p)[:, None]
    b = np.arange(q + 1)[None, :]
    pos = a + b + 1
    if spec.kind == "auc":
        return 0.0, np.broadcast_to(b / (p * q), (p, q + 1)).copy()
    if spec.kind == "pak":
        return 1.0, -(pos <= spec.k).astype(np.float64) / spec.k
    if spec.kind == "ndcg":
        z = measures.ndcg_normalizer(spec.k, p, spec.ndcg_normalizer)
        gains = np.array([measures.ndcg_gain(int(i), spec.k) for i in range(1, p + q + 1)])
        return 1.0, -gains[pos - 1] / z
    return 1.0, -((a + 1) / pos) / p


def _sorted_scores(batch: QueryBatch, w):
    s_rel = -(batch.d_rel @ w)
    s_irr = -(batch.d_irr @ w)
    perm_rel = np.argsort(-s_rel, axis=1, kind="stable")
    perm_irr = np.argsort(-s_irr, axis=1, kind="stable")
    return (
        np.take_along_axis(s_rel, perm_rel, axis=1),
        np.take_along_axis(s_irr, perm_irr, axis=1),
        perm_rel,
        perm_irr,
    )


def _auc_pattern(sr, sn):
    G, p = sr.shape
    q = sn.shape[1]
    # relevant j goes after irrelevant k iff 1 - 2 (s_j - s_k) > 0
    key = np.concatenate([sr, sn + 0.5], axis=1)
    is_irr = np.broadcast_to(np.r_[np.zeros(p, bool), np.ones(q, bool)], (G, p + q))
    within = np.broadcast_to(np.r_[np.arange(p), np.arange(q)], (G, p + q))
    order = np.lexsort((within, is_irr, -key), axis=-1)
    return ~np.take_along_axis(is_irr, order, axis=1)


def _dp_pattern(spec, sr, sn):
    G, p = sr.shape
    q = sn.shape[1]
    const, table = _placement_loss(spec, p, q)
    cum_n = np.concatenate([np.zeros((G, 1)), np.cumsum(sn, axis=1)], axis=1)
    b_grid = np.arange(q + 1)[None, None, :]
    # objective gained by placing relevant a with b irrelevant items already placed
    contrib = table[None] - (2.0 / (p * q)) * (b_grid * sr[:, :, None] - cum_n[:, None, :])

    value = np.zeros((G, p + 1, q + 1))
    inv = np.zeros((G, p + 1, q + 1), dtype=np.int64)
    take_rel = np.zeros((G, p + 1, q + 1), dtype=bool)
    for t in range(p + q - 1, -1, -1):
        a = np.arange(max(0, t - q), min(p, t) + 1)
        b = t - a
        can_r = a < p
        can_n = b < q
        ar = np.minimum(a, p - 1)
        bn = np.minimum(b + 1, q)
        an = np.minimum(a + 1, p)
        val_r = np.where(can_r, contrib[:, ar, b] + value[:, an, b], -np.inf)
        val_n = np.where(can_n, value[:, a, bn], -np.inf)
        inv_r = b + inv[:, an, b]
        inv_n = inv[:, a, bn]
        pick = (val_r > val_n + TIE_TOL) | ((val_r >= val_n - TIE_TOL) & (inv_r <= inv_n))
        pick &= can_r
        value[:, a, b] = np.where(pick, val_r, val_n)
        inv[:, a, b] = np.where(pick, inv_r, inv_n)
        take_rel[:, a, b] = pick

    pattern = np.zeros((G, p + q), dtype=bool)
    ai = np.zeros(G, dtype=np.int64)
    bi = np.zeros(G, dtype=np.int64)
    rows = np.arange(G)
    for step in range(p + q):
        r = take_rel[rows, ai, bi]
        pattern[:, step] = r
        ai += r
        bi += ~r
    return pattern


def pattern_loss(spec: MeasureSpec, pattern: np.ndarray) -> np.ndarray:
    """Label loss of each row of a boolean relevance-by-position matrix."""
    pattern = np.atleast_2d(pattern)
    G, n = pattern.shape
    p = int(pattern[0].sum())
    q = n - p
    const, table = _placement_loss(spec, p, q)
    before = np.cumsum(~pattern, axis=1)[pattern].reshape(G, p)
    return const + table[np.arange(p)[None, :], before].sum(axis=1)


def infer_batch(spec: MeasureSpec, batch: QueryBatch, w) -> BatchResult:
    w = np.asarray(w, dtype=np.float64)
    p, q = batch.p, batch.q
    G = len(batch)
    sr, sn, perm_rel, perm_irr = _sorted_scores(batch, w)
    pattern = _auc_pattern(sr, sn) if spec.kind == "auc" else _dp_pattern(spec, sr, sn)

    before = np.cumsum(~pattern, axis=1)[pattern].reshape(G, p)
    rows = np.arange(G)[:, None]
    cum_n = np.concatenate([np.zeros((G, 1)), np.cumsum(sn, axis=1)], axis=1)
    w_dpsi = (2.0 / (p * q)) * (before * sr - cum_n[rows, before]).sum(axis=1)
    losses = pattern_loss(spec, pattern)

    d_rel = np.take_along_axis(batch.d_rel, perm_rel[:, :, None], axis=1)
    d_irr = np.take_along_axis(batch.d_irr, perm_irr[:, :, None], axis=1)
    cum_d = np.concatenate([np.zeros((G, 1, d_irr.shape[2])), np.cumsum(d_irr, axis=1)], axis=1)
    dpsi = (2.0 / (p * q)) * (cum_d[rows, before] - before[:, :, None] * d_rel).sum(axis=1)

    orders = np.empty((G, p + q), dtype=np.int64)
    orders[pattern] = np.take_along_axis(batch.rel, perm_rel, axis=1).reshape(-1)
    orders[~pattern] = np.take_along_axis(batch.irr, perm_irr, axis=1).reshape(-1)
    return BatchResult(orders, losses - w_dpsi, losses, dpsi)


def infer_most_violated(spec: MeasureSpec, w, codes, gt) -> InferenceResult:
    """Most violated ranking for one query (exact)."""
    if not gt.usable:
        raise ValueError(f"query {gt.query}: both neighbour sets must be non-empty")
    res = infer_batch(spec, QueryBatch(codes, [gt], [0]), w)
    return InferenceResult(Interleaving(res.orders[0]), float(res.objectives[0]), float(res.losses[0]))


# ---------------------------------------------------------------------------
# reference enumeration

BRUTE_FORCE_LIMIT = 8


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64)


def brute_force_most_violated(spec: MeasureSpec, w, codes, gt) -> InferenceResult:
    """Exact maximiser by enumerating every permutation of the candidates.

    The model term is evaluated straight from the joint feature map and the
    loss through :mod:`structhash.measures`, once per interleaving pattern.
    Ties prefer fewer inverted pairs, then relevant items earlier.
    """
    p, q = gt.relevant.size, gt.irrelevant.size
    if p == 0 or q == 0:
        raise ValueError(f"query {gt.query}: both neighbour sets must be non-empty")
    n = p + q
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT} candidates, got {n}")
    codes = np.asarray(codes, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    cand = np.concatenate([np.sort(gt.relevant), np.sort(gt.irrelevant)])
    s = np.array([w @ phi(codes[gt.query], codes[u]) for u in cand])

    perms = _permutations(n)  # perms[r, position] = local candidate
    pos = np.argsort(perms, axis=1)
    y_jk = np.where(pos[:, :p, None] < pos[:, None, p:], 1.0, -1.0)
    diff = s[:p, None] - s[None, p:]
    w_psi = (y_jk * diff).sum(axis=(1, 2)) / (p * q)
    w_psi_true = diff.sum() / (p * q)
    w_dpsi = w_psi_true - w_psi
    inversions = (y_jk < 0).sum(axis=(1, 2))

    patterns = perms < p
    keys, first, inverse = np.unique(patterns, axis=0, return_index=True, return_inverse=True)
    y_true = measures.true_ranking(gt)
    pattern_losses = np.array(
        [measures.label_loss(spec, y_true, cand[perms[r]], gt) for r in first]
    )
    losses = pattern_losses[inverse.reshape(-1)]
    objective = losses - w_dpsi

    best = objective.max()
    tied = np.flatnonzero(objective >= best - TIE_TOL)
    tied = tied[inversions[tied] == inversions[tied].min()]
    # lexicographic on the pattern with "relevant" sorting first
    lex = np.lexsort(tuple((~patterns[tied]).T[::-1]))
    r = tied[lex[0]]
    return InferenceResult(Interleaving(cand[perms[r]]), float(objective[r]), float(losses[r]))
