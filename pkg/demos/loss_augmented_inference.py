"""
Finding the most violated ranking
=================================

Training repeatedly asks: which ranking has a large loss but scores almost
as well as the true one under the current bit weights? This script answers
that question for one query, first with the fast solver and then by
enumerating every permutation.
"""

import numpy as np

from structhash.data import QueryNeighborhood
from structhash.inference import brute_force_most_violated, infer_most_violated
from structhash.measures import MeasureSpec

rng = np.random.default_rng(4)
codes = rng.integers(0, 2, size=(8, 8)).astype(np.uint8)
gt = QueryNeighborhood(0, [1, 2, 3], [4, 5, 6, 7])
spec = MeasureSpec("ndcg", 3)

hamming = (codes != codes[0]).sum(axis=1)
print("hamming distance to the query:", dict(enumerate(hamming.tolist())))

###############################################################################
# With zero weights every ranking scores the same, so the answer is simply the
# worst ranking for the loss. As the weights grow the model's preference
# takes over and the violator moves towards the Hamming order.

for scale in (0.0, 0.05, 0.2, 1.0, 5.0):
    w = np.full(8, scale)
    fast = infer_most_violated(spec, w, codes, gt)
    slow = brute_force_most_violated(spec, w, codes, gt)
    print(f"w={scale:<5} ranking {list(fast.ranking.order)} loss {fast.loss:.3f} "
          f"objective {fast.objective:.4f} (enumeration {slow.objective:.4f})")
