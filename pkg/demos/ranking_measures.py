"""
Ranking measures
================

Four ways of scoring one ranked list against a binary ground truth, and
the label loss ``1 - score`` that training minimises.
"""

import numpy as np

from structhash.data import QueryNeighborhood
from structhash.measures import MeasureSpec, label_loss, score, true_ranking

# two relevant items (1, 2) and two irrelevant ones (3, 4)
gt = QueryNeighborhood(0, [1, 2], [3, 4])
ranking = [1, 3, 2, 4]

specs = {
    "AUC": MeasureSpec("auc"),
    "P@3": MeasureSpec("pak", 3),
    "NDCG@3": MeasureSpec("ndcg", 3),
    "NDCG@3 (literal)": MeasureSpec("ndcg", 3, "literal"),
    "mAP": MeasureSpec("map"),
}

print(f"ranking {ranking}, relevant {gt.relevant.tolist()}")
for name, spec in specs.items():
    print(f"  {name:<17} score {score(spec, ranking, gt):.4f}")

###############################################################################
# With only two relevant items, P@3 and the literal NDCG normaliser (which
# always divides by K ideal gains) cannot reach one, even for the perfect
# ranking.

perfect = true_ranking(gt)
for name, spec in specs.items():
    loss = label_loss(spec, perfect, perfect, gt)
    print(f"  loss of the perfect ranking under {name:<17} {loss:.4f}")

###############################################################################
# AUC counts correctly ordered pairs, so reversing a list mirrors its score.

rng = np.random.default_rng(0)
big = QueryNeighborhood(0, np.arange(1, 6), np.arange(6, 16))
shuffled = rng.permutation(np.arange(1, 16))
forward = score(specs["AUC"], shuffled, big)
backward = score(specs["AUC"], shuffled[::-1], big)
print(f"AUC {forward:.3f}, reversed {backward:.3f}, sum {forward + backward:.3f}")
