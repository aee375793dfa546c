"""Encoding, weighted Hamming ranking, retrieval metrics and the LSH baseline."""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import measures
from .data import DataMatrix, Standardization
from .hashing import HashModel

CODE_MAGIC = b"SHCD"


@dataclass(frozen=True)
class CodeMatrix:
    """Binary codes packed little-endian into 64-bit words, bit ``b`` in word ``b // 64``."""

    words: np.ndarray  # (rows, ceil(bits / 64)) uint64
    bits: int

    @classmethod
    def from_bits(cls, bits) -> "CodeMatrix":
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise ValueError("expected a (rows, bits) array")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise ValueError("code bits must be 0 or 1")
        rows, nbits = bits.shape
        nwords = max(1, -(-nbits // 64))
        padded = np.zeros((rows, nwords * 64), dtype=np.uint8)
        padded[:, :nbits] = bits
        packed = np.packbits(padded, axis=1, bitorder="little")
        return cls(packed.view("<u8").reshape(rows, nwords).astype(np.uint64), nbits)

    @property
    def rows(self) -> int:
        return self.words.shape[0]

    def to_bits(self) -> np.ndarray:
        raw = np.ascontiguousarray(self.words.astype("<u8")).view(np.uint8)
        return np.unpackbits(raw, axis=1, bitorder="little")[:, : self.bits]

    def __getitem__(self, idx) -> "CodeMatrix":
        return CodeMatrix(np.atleast_2d(self.words[idx]), self.bits)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(CODE_MAGIC)
            fh.write(struct.pack("<II", self.rows, self.bits))
            fh.write(np.ascontiguousarray(self.words, dtype="<u8").tobytes())

    @classmethod
    def load(cls, path) -> "CodeMatrix":
        blob = Path(path).read_bytes()
        if blob[:4] != CODE_MAGIC:
            raise ValueError(f"{path}: not a code file")
        rows, bits = struct.unpack("<II", blob[4:12])
        nwords = max(1, -(-bits // 64))
        if len(blob) != 12 + 8 * rows * nwords:
            raise ValueError(f"{path}: truncated code file")
        words = np.frombuffer(blob, dtype="<u8", offset=12).reshape(rows, nwords).astype(np.uint64)
        return cls(words, bits)


def encode(model: HashModel, data) -> CodeMatrix:
    """Bit ``b`` of a row is 1 iff ``v_b . x + offset_b >= 0`` after preprocessing."""
    values = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("cannot encode an empty dataset")
    if values.shape[1] != model.input_dims:
        raise ValueError(f"model expects {model.input_dims} input dims, data has {values.shape[1]}")
    return CodeMatrix.from_bits(model.hash_features(model.features(values)))


def weighted_hamming(w, code_i, code_j) -> float:
    code_i = np.asarray(code_i)
    code_j = np.asarray(code_j)
    w = np.asarray(w, dtype=np.float64)
    if not (code_i.shape == code_j.shape == w.shape):
        raise ValueError("codes and weights must have equal length")
    return float(w @ (code_i != code_j))


def hamming_distances(query: CodeMatrix, codes: CodeMatrix) -> np.ndarray:
    """Unweighted distances from one packed query to every packed row (popcount)."""
    return np.bitwise_count(codes.words ^ query.words[0]).sum(axis=1).astype(np.int64)


def weighted_distances(query: CodeMatrix, codes: CodeMatrix, w) -> np.ndarray:
    """Weighted distances: sum ``w`` over the set bits of each XOR."""
    w = np.asarray(w, dtype=np.float64)
    xor = CodeMatrix(codes.words ^ query.words[0], codes.bits).to_bits()
    return xor @ w


def rank_database(query_code: CodeMatrix, codes: CodeMatrix, w=None) -> np.ndarray:
    """Database indices by ascending (weighted) Hamming distance, ties by index."""
    if w is None:
        dist = hamming_distances(query_code, codes)
    else:
        dist = weighted_distances(query_code, codes, w)
    return np.argsort(dist, kind="stable")


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class MetricsReport:
    ks: list
    per_query: dict  # metric name -> array over evaluated queries
    means: dict
    pr_precision: np.ndarray
    pr_recall: np.ndarray
    evaluated: np.ndarray
    excluded: list
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "queries_evaluated": int(self.evaluated.size),
            "queries_excluded": len(self.excluded),
            "excluded": [int(q) for q in self.excluded],
            "means": self.means,
            "per_query": {k: np.asarray(v).tolist() for k, v in self.per_query.items()},
            "pr_curve": {"precision": self.pr_precision.tolist(), "recall": self.pr_recall.tolist()},
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def write_csv(self, path) -> None:
        """One row per cutoff K with the mean NDCG@K and P@K."""
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k", "ndcg", "precision", "map", "auc"])
            for k in self.ks:
                out.writerow([k, repr(self.means[f"ndcg@{k}"]), repr(self.means[f"p@{k}"]),
                              repr(self.means["map"]), repr(self.means["auc"])])

    def write_pr_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["cutoff", "precision", "recall"])
            for c, (p, r) in enumerate(zip(self.pr_precision, self.pr_recall), start=1):
                out.writerow([c, repr(float(p)), repr(float(r))])


def evaluate(rankings, ground_truth, ks=(100,), config=None) -> MetricsReport:
    """Per-query and mean NDCG@K, P@K, mAP, AUC plus the mean PR curve.

    Queries whose relevant set is empty are skipped and listed in
    ``excluded``. The PR curve has one point per cutoff ``1..n``.
    """
    ks = [int(k) for k in (ks if np.ndim(ks) else [ks])]
    per_query = {f"ndcg@{k}": [] for k in ks} | {f"p@{k}": [] for k in ks} | {"map": [], "auc": []}
    evaluated, excluded = [], []
    prec_sum = rec_sum = None
    for qi, (order, gt) in enumerate(zip(rankings, ground_truth)):
        if gt.relevant.size == 0:
            excluded.append(qi)
            continue
        order = np.asarray(order)
        evaluated.append(qi)
        for k in ks:
            per_query[f"ndcg@{k}"].append(measures.score_ndcg(order, gt, k))
            per_query[f"p@{k}"].append(measures.score_precision_at_k(order, gt, k))
        per_query["map"].append(measures.score_map(order, gt))
        if gt.irrelevant.size:
            per_query["auc"].append(measures.score_auc(order, gt))
        else:
            per_query["auc"].append(1.0)
        hits = np.cumsum(np.isin(order, gt.relevant))
        prec = hits / np.arange(1, order.size + 1)
        rec = hits / gt.relevant.size
        prec_sum = prec if prec_sum is None else prec_sum + prec
        rec_sum = rec if rec_sum is None else rec_sum + rec
    if not evaluated:
        raise ValueError("no query has a non-empty relevant set")
    per_query = {k: np.array(v) for k, v in per_query.items()}
    means = {k: float(v.mean()) for k, v in per_query.items()}
    count = len(evaluated)
    return MetricsReport(ks, per_query, means, prec_sum / count, rec_sum / count,
                         np.array(evaluated), excluded, dict(config or {}, ks=ks))


def lsh_baseline(dims: int, bits: int, seed=0, standardization: Standardization | None = None,
                 kernel=None) -> HashModel:
    """Random hyperplanes through the origin with unit bit weights."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    rng = np.random.default_rng(seed)
    return HashModel(rng.standard_normal((bits, dims)), np.zeros(bits), np.ones(bits),
                     standardization=standardization, kernel=kernel, meta={"method": "lsh", "seed": seed})
