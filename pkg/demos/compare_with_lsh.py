"""
Learned codes against random hyperplanes
========================================

Locality sensitive hashing draws its hyperplanes at random and weighs every
bit equally. Here both methods get the same bit budget on the same data.
"""

import numpy as np

from structhash import TrainConfig, evaluate_model, fit, lsh_baseline
from structhash.pipeline import query_ground_truth


def mixture(n, seed, classes=5):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, classes, n)
    angle = 2 * np.pi * y / classes
    return 4 * np.c_[np.cos(angle), np.sin(angle)] + rng.standard_normal((n, 2)), y


X, y = mixture(500, 1)
Q, yq = mixture(200, 2)
gts = query_ground_truth(Q, X, yq, y)

print(f"{'bits':>4}  {'structhash':>10}  {'lsh':>6}   (mean NDCG@10)")
for bits in (2, 4, 8):
    model, _ = fit(X, y, TrainConfig(loss="ndcg", k=10, bits=bits))
    lsh = lsh_baseline(2, bits, seed=0, standardization=model.standardization)
    ours = evaluate_model(model, Q, X, gts, [10]).means["ndcg@10"]
    base = evaluate_model(lsh, Q, X, gts, [10]).means["ndcg@10"]
    print(f"{bits:>4}  {ours:>10.4f}  {base:>6.4f}")
