"""Dataset ingestion, standardization, ground-truth neighbourhoods and kernel features."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RAW_MAGIC = b"SHDS"


class DataFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.mean.shape[0]:
            raise ValueError(
                f"expected {self.mean.shape[0]} dims, got {values.shape[-1]}"
            )
        return (values - self.mean) / self.scale


@dataclass(frozen=True)
class DataMatrix:
    """An ``rows x dims`` feature matrix, one example per row."""

    values: np.ndarray
    standardization: Standardization | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"data must be a non-empty 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class QueryNeighborhood:
    """Relevant / irrelevant index sets of one query.

    ``flagged`` marks a degenerate neighbourhood (one side empty) that cannot
    be used for training.
    """

    query: int
    relevant: np.ndarray
    irrelevant: np.ndarray
    flagged: bool = False

    def __post_init__(self):
        rel = np.asarray(self.relevant, dtype=np.int64).reshape(-1)
        irr = np.asarray(self.irrelevant, dtype=np.int64).reshape(-1)
        if np.intersect1d(rel, irr).size:
            raise ValueError("relevant and irrelevant sets overlap")
        if self.query in rel or self.query in irr:
            raise ValueError("query index appears in its own neighbourhood")
        object.__setattr__(self, "relevant", rel)
        object.__setattr__(self, "irrelevant", irr)

    @property
    def usable(self) -> bool:
        return self.relevant.size > 0 and self.irrelevant.size > 0


# ---------------------------------------------------------------------------
# file formats


def load_dataset(path, format: str = "csv", label_column: bool = False, labels_path=None):
    """Load a dataset; returns ``(DataMatrix, labels or None)``.

    ``format`` is ``"csv"`` or ``"raw"``. With ``label_column`` the last CSV
    field of every row is an integer class label. ``labels_path`` points to a
    separate labels file (one integer per line).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == "csv":
        values, labels = _read_csv(path, label_column)
    elif format in ("raw", "raw-binary"):
        values = read_raw(path)
        labels = None
    else:
        raise ValueError(f"unknown dataset format {format!r}")
    if labels_path is not None:
        labels = load_labels(labels_path)
        if labels.shape[0] != values.shape[0]:
            raise DataFormatError(
                f"{labels_path}: {labels.shape[0]} labels for {values.shape[0]} rows"
            )
    return DataMatrix(values), labels


def _read_csv(path: Path, label_column: bool):
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not tok.strip() for tok in record):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} fields, found {len(record)}"
                )
            try:
                parsed = [float(tok) for tok in record]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: non-numeric token ({exc})") from None
            if label_column:
                lab = parsed.pop()
                if lab != int(lab):
                    raise DataFormatError(f"{path}:{lineno}: label {lab} is not an integer")
                labels.append(int(lab))
            rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    if label_column and width < 2:
        raise DataFormatError(f"{path}: label column requested but rows have one field")
    values = np.asarray(rows, dtype=np.float64)
    return values, (np.asarray(labels, dtype=np.int64) if label_column else None)


def read_raw(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise DataFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != RAW_MAGIC:
        raise DataFormatError(f"{path}: bad magic {blob[:4]!r} at offset 0")
    rows, dims = struct.unpack("<II", blob[4:12])
    if rows == 0 or dims == 0:
        raise DataFormatError(f"{path}: empty dataset ({rows}x{dims})")
    expected = 12 + 4 * rows * dims
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: payload size mismatch at offset 12: expected {expected} bytes, found {len(blob)}"
        )
    return np.frombuffer(blob, dtype="<f4", offset=12).reshape(rows, dims).astype(np.float64)


def write_raw(path, values) -> None:
    values = np.asarray(values)
    rows, dims = values.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC)
        fh.write(struct.pack("<II", rows, dims))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_labels(path) -> np.ndarray:
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                labels.append(int(tok))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad label {tok!r}") from None
    return np.asarray(labels, dtype=np.int64)


def write_csv(path, values, labels=None) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for r, row in enumerate(values):
            fields = [repr(float(v)) for v in row]
            if labels is not None:
                fields.append(str(int(labels[r])))
            writer.writerow(fields)


# ---------------------------------------------------------------------------
# preprocessing


def standardize(data: DataMatrix) -> DataMatrix:
    """Zero-mean, unit-variance columns (population denominator).

    Constant columns keep scale 1. The fitted statistics are attached to the
    result so they can be re-applied to test data.
    """
    if data.rows < 2:
        raise ValueError("standardize needs at least two rows")
    mean = data.values.mean(axis=0)
    scale = data.values.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    stats = Standardization(mean, scale)
    return DataMatrix(stats.apply(data.values), stats)


def apply_standardization(data: DataMatrix, stats: Standardization) -> DataMatrix:
    return DataMatrix(stats.apply(data.values), stats)


# ---------------------------------------------------------------------------
# ground truth


def ground_truth_by_label(labels, i: int) -> QueryNeighborhood:
    labels = np.asarray(labels)
    idx = np.arange(labels.shape[0])
    others = idx != i
    same = (labels == labels[i]) & others
    rel = idx[same]
    irr = idx[others & ~same]
    return QueryNeighborhood(i, rel, irr, flagged=not (rel.size and irr.size))


def ground_truth_by_percentile(data, i: int, pct: float = 2.0, database=None) -> QueryNeighborhood:
    """Relevant = the ``ceil(pct/100 * (rows-1))`` Euclidean nearest points.

    Distance ties are broken by ascending index. ``database`` optionally gives
    a separate point set to rank (the query index then refers to ``data`` and
    no self-exclusion is applied); by default the query ranks its own set.
    """
    X = data.values if isinstance(data, DataMatrix) else np.asarray(data, dtype=np.float64)
    if not 0 < pct < 100:
        raise ValueError("pct must lie in (0, 100)")
    if database is None:
        if X.shape[0] < 2:
            raise ValueError("need at least two rows")
        dist = np.sqrt(((X - X[i]) ** 2).sum(axis=1))
        idx = np.flatnonzero(np.arange(X.shape[0]) != i)
        query = i
    else:
        D = database.values if isinstance(database, DataMatrix) else np.asarray(database, dtype=np.float64)
        dist = np.sqrt(((D - X[i]) ** 2).sum(axis=1))
        idx = np.arange(D.shape[0])
        query = -1
    count = math.ceil(pct * idx.size / 100)
    order = idx[np.lexsort((idx, dist[idx]))]
    rel = np.sort(order[:count])
    irr = np.sort(order[count:])
    return QueryNeighborhood(query, rel, irr, flagged=not (rel.size and irr.size))


def sample_neighborhood(full: QueryNeighborhood, r: int = 50, ir: int = 50, seed=0) -> QueryNeighborhood:
    """Uniformly subsample both sides without replacement; deterministic in ``seed``."""
    if not full.usable:
        raise ValueError(f"query {full.query}: both neighbour sets must be non-empty")
    rng = np.random.default_rng(seed)
    rel = full.relevant
    irr = full.irrelevant
    if rel.size > r:
        rel = rng.choice(rel, size=r, replace=False)
    if irr.size > ir:
        irr = rng.choice(irr, size=ir, replace=False)
    return QueryNeighborhood(full.query, np.sort(rel), np.sort(irr))


# ---------------------------------------------------------------------------
# kernel features


@dataclass(frozen=True)
class KernelMapConfig:
    anchor_count: int = 300
    bandwidth: float | None = None
    anchor_indices: tuple | None = None
    seed: int = 0


@dataclass(frozen=True)
class KernelMap:
    """Gaussian responses to a fixed set of anchor points."""

    anchors: np.ndarray
    bandwidth: float
    anchor_indices: tuple = field(default=())

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.bandwidth}")

    @property
    def dims(self) -> int:
        return self.anchors.shape[0]

    def transform(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        out = np.empty((values.shape[0], self.anchors.shape[0]))
        denom = 2.0 * self.bandwidth**2
        # direct differences keep the self-anchor response exactly 1
        for start in range(0, values.shape[0], 1024):
            chunk = values[start:start + 1024]
            sq = ((chunk[:, None, :] - self.anchors[None, :, :]) ** 2).sum(axis=2)
            out[start:start + 1024] = np.exp(-sq / denom)
        return out


def default_bandwidth(values: np.ndarray, sample: int = 1000, seed: int = 0) -> float:
    """Mean pairwise Euclidean distance over a seeded subsample."""
    values = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    if values.shape[0] > sample:
        values = values[np.sort(rng.choice(values.shape[0], sample, replace=False))]
    n = values.shape[0]
    if n < 2:
        return 1.0
    sq = (values**2).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * values @ values.T, 0.0)
    iu = np.triu_indices(n, k=1)
    mean = float(np.sqrt(d2[iu]).mean())
    return mean if mean > 0 else 1.0


def fit_kernel_map(data: DataMatrix, cfg: KernelMapConfig = KernelMapConfig()) -> KernelMap:
    if cfg.bandwidth is not None and not cfg.bandwidth > 0:
        raise ValueError(f"kernel bandwidth must be positive, got {cfg.bandwidth}")
    if cfg.anchor_indices is not None:
        idx = np.asarray(cfg.anchor_indices, dtype=np.int64)
    else:
        if cfg.anchor_count > data.rows:
            raise ValueError(f"anchor_count {cfg.anchor_count} exceeds {data.rows} rows")
        rng = np.random.default_rng(cfg.seed)
        idx = np.sort(rng.choice(data.rows, cfg.anchor_count, replace=False))
    sigma = cfg.bandwidth if cfg.bandwidth is not None else default_bandwidth(data.values, seed=cfg.seed)
    return KernelMap(data.values[idx].copy(), float(sigma), tuple(int(k) for k in idx))


def kernel_feature_map(data: DataMatrix, cfg: KernelMapConfig | KernelMap) -> DataMatrix:
    """Map rows to ``exp(-|x - s_a|^2 / (2 sigma^2))`` over the anchors ``s_a``."""
    kmap = cfg if isinstance(cfg, KernelMap) else fit_kernel_map(data, cfg)
    return DataMatrix(kmap.transform(data.values))

