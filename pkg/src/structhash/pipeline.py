"""End-to-end training and evaluation on raw feature matrices."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import retrieval
from .data import (
    DataMatrix,
    KernelMapConfig,
    QueryNeighborhood,
    fit_kernel_map,
    ground_truth_by_label,
    ground_truth_by_percentile,
    sample_neighborhood,
    standardize,
)
from .hashing import HashLearnConfig, HashModel, train_structhash
from .measures import MeasureSpec
from .solver import SolverConfig

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    loss: str = "ndcg"
    k: int = 100
    ndcg_normalizer: str = "ideal"
    bits: int = 64
    C: float = 10.0
    eps_cp: float = 1e-3
    max_cp_iters: int = 100
    relevant: int = 50
    irrelevant: int = 50
    percentile: float | None = None
    standardize: bool = True
    kernel: bool = False
    anchors: int = 300
    bandwidth: float | None = None
    alpha: float = 10.0
    smooth_eps: float = 1e-3
    random_planes: int = 50
    optimizer: str = "quasi-newton"
    max_opt_iters: int = 200
    balanced_bits: bool = False
    max_queries: int | None = None
    threads: int = 1
    seed: int = 0

    def spec(self) -> MeasureSpec:
        k = self.k if self.loss in ("pak", "ndcg") else None
        return MeasureSpec(self.loss, k, self.ndcg_normalizer)

    def solver(self) -> SolverConfig:
        return SolverConfig(self.C, self.eps_cp, self.max_cp_iters, threads=self.threads)

    def hash_learner(self) -> HashLearnConfig:
        return HashLearnConfig(self.alpha, self.smooth_eps, self.random_planes, self.optimizer,
                               self.max_opt_iters, seed=self.seed, balanced=self.balanced_bits)


def full_neighborhood(values, labels, i, percentile=None):
    if labels is not None:
        return ground_truth_by_label(labels, i)
    return ground_truth_by_percentile(values, i, percentile if percentile is not None else 2.0)


def training_queries(values, labels, cfg: TrainConfig):
    """Sampled neighbourhoods for every usable training row.

    Returns ``(queries, skipped)``; ``skipped`` lists rows whose full
    neighbourhood has an empty side.
    """
    n = values.shape[0]
    rows = np.arange(n)
    if cfg.max_queries is not None and cfg.max_queries < n:
        rng = np.random.default_rng([cfg.seed, 1])
        rows = np.sort(rng.choice(n, cfg.max_queries, replace=False))
    queries, skipped = [], []
    for i in rows:
        full = full_neighborhood(values, labels, int(i), cfg.percentile)
        if not full.usable:
            skipped.append(int(i))
            continue
        queries.append(sample_neighborhood(full, cfg.relevant, cfg.irrelevant, seed=[cfg.seed, int(i)]))
    if not queries:
        raise ValueError("no training query has both relevant and irrelevant neighbours")
    return queries, skipped


def fit(data, labels=None, cfg: TrainConfig = TrainConfig()):
    """Preprocess, sample neighbourhoods and learn a model. Returns ``(model, trace)``."""
    data = data if isinstance(data, DataMatrix) else DataMatrix(data)
    queries, skipped = training_queries(data.values, labels, cfg)
    if skipped:
        log.warning("%d training rows skipped (empty neighbour set)", len(skipped))
    feats = data
    stats = None
    if cfg.standardize:
        feats = standardize(data)
        stats = feats.standardization
    kmap = None
    if cfg.kernel:
        kmap = fit_kernel_map(feats, KernelMapConfig(cfg.anchors, cfg.bandwidth, seed=cfg.seed))
        X = kmap.transform(feats.values)
    else:
        X = feats.values
    model, trace = train_structhash(X, queries, cfg.spec(), cfg.bits, cfg.solver(), cfg.hash_learner())
    model.standardization = stats
    model.kernel = kmap
    model.meta = {"config": asdict(cfg), "skipped_queries": len(skipped), "converged": trace.converged}
    if trace.failed:
        model.meta["failed"] = trace.failed
    return model, trace


def query_ground_truth(query_values, db_values, query_labels=None, db_labels=None, percentile=None):
    """Neighbourhoods of external queries against a database."""
    gts = []
    for i in range(query_values.shape[0]):
        if query_labels is not None:
            rel = np.flatnonzero(db_labels == query_labels[i])
            irr = np.flatnonzero(db_labels != query_labels[i])
            gts.append(QueryNeighborhood(-1, rel, irr, flagged=not (rel.size and irr.size)))
        else:
            gts.append(ground_truth_by_percentile(query_values, i, percentile or 2.0, database=db_values))
    return gts


def evaluate_model(model: HashModel, query_values, db_values, gts, ks=(100,), config=None):
    q_codes = retrieval.encode(model, query_values)
    db_codes = retrieval.encode(model, db_values)
    rankings = [retrieval.rank_database(q_codes[i], db_codes, model.w) for i in range(q_codes.rows)]
    return retrieval.evaluate(rankings, gts, ks, config=dict(config or {}, bits=model.bits))
