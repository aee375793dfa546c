"""Column generation of hash functions.

Each new bit is a linear perceptron ``h(x) = [v.x + b >= 0]`` chosen to
maximise a weighted sum of triplet scores
``|h(x_i) - h(x_k)| - |h(x_i) - h(x_j)|``, where the triplet weights come
from the duals of the current working set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import optim
from .data import KernelMap, Standardization
from .lp import SolverError
from .measures import MeasureSpec
from .solver import SolverConfig, WorkingSet, train_w

log = logging.getLogger(__name__)

MODEL_FORMAT = "structhash-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Hyperplane:
    v: np.ndarray
    b: float

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)) or not np.any(v):
            raise ValueError("hyperplane normal must be finite and non-zero")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "b", float(self.b))

    def __call__(self, X) -> np.ndarray:
        """Binary outputs in {0, 1}; a point on the plane maps to 1."""
        return (np.asarray(X) @ self.v + self.b >= 0).astype(np.uint8)


# ---------------------------------------------------------------------------
# triplet weights


@dataclass(frozen=True)
class PairWeights:
    """Signed weights on (anchor, other) pairs.

    A triplet ``(i, j, k)`` with weight ``t`` adds ``+t`` to pair ``(i, k)``
    and ``-t`` to pair ``(i, j)``; every subproblem quantity is linear in
    the triplet weights, so this compressed form gives identical values.
    """

    anchor: np.ndarray
    other: np.ndarray
    weight: np.ndarray

    @classmethod
    def aggregate(cls, anchor, other, weight, n_points=None):
        anchor = np.asarray(anchor, dtype=np.int64)
        other = np.asarray(other, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        if anchor.size == 0:
            return cls(anchor, other, weight)
        n = n_points or int(max(anchor.max(), other.max())) + 1
        keys, inv = np.unique(anchor * n + other, return_inverse=True)
        total = np.bincount(inv.reshape(-1), weights=weight, minlength=keys.size)
        keep = total != 0
        return cls(keys[keep] // n, keys[keep] % n, total[keep])

    def __len__(self):
        return self.weight.size

    def pairs(self) -> "PairWeights":
        return self


@dataclass(frozen=True)
class TripletWeightMap:
    anchor: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    weight: np.ndarray

    @classmethod
    def aggregate(cls, anchor, pos, neg, weight):
        anchor, pos, neg = (np.asarray(x, dtype=np.int64) for x in (anchor, pos, neg))
        weight = np.asarray(weight, dtype=np.float64)
        if anchor.size == 0:
            return cls(anchor, pos, neg, weight)
        stacked = np.stack([anchor, pos, neg], axis=1)
        keys, inv = np.unique(stacked, axis=0, return_inverse=True)
        total = np.bincount(inv.reshape(-1), weights=weight, minlength=keys.shape[0])
        keep = total > 0
        keys = keys[keep]
        return cls(keys[:, 0], keys[:, 1], keys[:, 2], total[keep])

    def __len__(self):
        return self.weight.size

    def total(self) -> float:
        return float(self.weight.sum())

    def as_dict(self) -> dict:
        return {
            (int(i), int(j), int(k)): float(t)
            for i, j, k, t in zip(self.anchor, self.pos, self.neg, self.weight)
        }

    def pairs(self) -> PairWeights:
        return PairWeights.aggregate(
            np.concatenate([self.anchor, self.anchor]),
            np.concatenate([self.neg, self.pos]),
            np.concatenate([self.weight, -self.weight]),
        )


def _inversions(order, gt):
    """Per-item inversion counts of an ordering.

    Returns ``(rel, n_before, irr, n_after)``: each relevant item with the
    number of irrelevant items ranked ahead of it, and each irrelevant item
    with the number of relevant items ranked after it.
    """
    order = np.asarray(order)
    is_rel = np.isin(order, gt.relevant)
    irr_before = np.cumsum(~is_rel)
    rel_after = is_rel.sum() - np.cumsum(is_rel)
    return order[is_rel], irr_before[is_rel], order[~is_rel], rel_after[~is_rel]


def triplet_weights(ws: WorkingSet, queries) -> TripletWeightMap:
    """Explicit triplet weights ``sum_t lam_t * 2 / (|P||N|)`` over inverted pairs."""
    parts = []
    for e in ws:
        if e.lam <= 0:
            continue
        for i in np.flatnonzero(e.c):
            gt = queries[i]
            order = np.asarray(e.rankings[i])
            pos = {int(u): r for r, u in enumerate(order)}
            rel = gt.relevant[:, None]
            irr = gt.irrelevant[None, :]
            pr = np.array([pos[int(u)] for u in gt.relevant])[:, None]
            pn = np.array([pos[int(u)] for u in gt.irrelevant])[None, :]
            inv = pn < pr
            if not inv.any():
                continue
            j = np.broadcast_to(rel, inv.shape)[inv]
            k = np.broadcast_to(irr, inv.shape)[inv]
            coef = e.lam * 2.0 / (gt.relevant.size * gt.irrelevant.size)
            parts.append((np.full(j.size, gt.query), j, k, np.full(j.size, coef)))
    if not parts:
        empty = np.zeros(0, dtype=np.int64)
        return TripletWeightMap(empty, empty, empty, np.zeros(0))
    return TripletWeightMap.aggregate(*(np.concatenate(col) for col in zip(*parts)))


def pair_weights(ws: WorkingSet, queries, n_points=None) -> PairWeights:
    """Same weights as :func:`triplet_weights`, collapsed onto pairs without listing triplets."""
    anchor, other, weight = [], [], []
    for e in ws:
        if e.lam <= 0:
            continue
        for i in np.flatnonzero(e.c):
            gt = queries[i]
            coef = e.lam * 2.0 / (gt.relevant.size * gt.irrelevant.size)
            rel, n_before, irr, n_after = _inversions(e.rankings[i], gt)
            anchor.append(np.full(rel.size + irr.size, gt.query))
            other.append(np.concatenate([rel, irr]))
            weight.append(coef * np.concatenate([-n_before, n_after]).astype(np.float64))
    if not anchor:
        empty = np.zeros(0, dtype=np.int64)
        return PairWeights(empty, empty, np.zeros(0))
    return PairWeights.aggregate(np.concatenate(anchor), np.concatenate(other), np.concatenate(weight), n_points)


def uniform_triplet_weights(queries) -> TripletWeightMap:
    """Weight ``2 / (|P||N|)`` on every (query, relevant, irrelevant) triplet."""
    parts = []
    for gt in queries:
        j, k = np.meshgrid(gt.relevant, gt.irrelevant, indexing="ij")
        coef = 2.0 / (gt.relevant.size * gt.irrelevant.size)
        parts.append((np.full(j.size, gt.query), j.ravel(), k.ravel(), np.full(j.size, coef)))
    return TripletWeightMap.aggregate(*(np.concatenate(col) for col in zip(*parts)))


def uniform_pair_weights(queries, n_points=None) -> PairWeights:
    anchor, other, weight = [], [], []
    for gt in queries:
        p, q = gt.relevant.size, gt.irrelevant.size
        anchor.append(np.full(p + q, gt.query))
        other.append(np.concatenate([gt.relevant, gt.irrelevant]))
        weight.append(np.concatenate([np.full(p, -2.0 / p), np.full(q, 2.0 / q)]))
    return PairWeights.aggregate(np.concatenate(anchor), np.concatenate(other), np.concatenate(weight), n_points)


# ---------------------------------------------------------------------------
# subproblem


@dataclass
class HashLearnConfig:
    alpha: float = 10.0
    smooth_eps: float = 1e-3
    n_random_planes: int = 50
    optimizer: str = "quasi-newton"
    max_opt_iters: int = 200
    grad_tol: float = 1e-6
    seed: int = 0
    balanced: bool = False

    def __post_init__(self):
        if not self.alpha > 0 or not self.smooth_eps > 0:
            raise ValueError("alpha and smooth_eps must be positive")
        if self.optimizer not in ("quasi-newton", "gradient-ascent"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def subproblem_value(h, tw, X) -> float:
    """Weighted triplet score of a binary hash function ``h`` (callable or bit vector)."""
    pw = tw.pairs()
    bits = h(X) if callable(h) else np.asarray(h)
    bits = bits.astype(np.float64)
    return float(pw.weight @ np.abs(bits[pw.anchor] - bits[pw.other]))


def smoothed_value_and_gradient(v, b, tw, X, cfg: HashLearnConfig = HashLearnConfig()):
    """Sigmoid-relaxed subproblem value and its gradient over ``(v, b)``.

    ``h`` becomes ``1 / (1 + exp(-alpha (v.x + b)))`` and ``|u|`` becomes
    ``sqrt(u^2 + eps^2) - eps``. Returns ``(value, grad_v, grad_b)``.
    """
    pw = tw.pairs()
    X = np.asarray(X, dtype=np.float64)
    z = X @ np.asarray(v, dtype=np.float64) + b
    h = expit(cfg.alpha * z)
    u = h[pw.anchor] - h[pw.other]
    root = np.sqrt(u * u + cfg.smooth_eps**2)
    value = float(pw.weight @ (root - cfg.smooth_eps))
    du = pw.weight * u / root
    n = X.shape[0]
    dh = np.bincount(pw.anchor, weights=du, minlength=n) - np.bincount(pw.other, weights=du, minlength=n)
    dz = dh * cfg.alpha * h * (1.0 - h)
    return value, X.T @ dz, float(dz.sum())


def _median_offset(X, v) -> float:
    return -float(np.median(X @ v))


def spectral_init(tw, X, seed=0, tol=1e-6, max_iter=20_000):
    """Leading eigenvector of the sign-relaxed subproblem matrix.

    ``M = sum W_iu (x_i - x_u)(x_i - x_u)^T`` over the signed pair weights.
    Uses power iteration on ``M / |M|_F + I``. Returns ``(plane, ok)``;
    ``plane`` is ``None`` when ``M`` vanishes or iteration does not converge.
    """
    pw = tw.pairs()
    if len(pw) == 0:
        return None, False
    X = np.asarray(X, dtype=np.float64)
    E = X[pw.anchor] - X[pw.other]
    M = E.T @ (pw.weight[:, None] * E)
    v, ok = leading_eigenvector(M, seed=seed, tol=tol, max_iter=max_iter)
    if not ok:
        return None, False
    return Hyperplane(v, _median_offset(X, v)), True


def leading_eigenvector(M, seed=0, tol=1e-6, max_iter=20_000):
    """Eigenvector of the largest (algebraic) eigenvalue of symmetric ``M``."""
    M = np.asarray(M, dtype=np.float64)
    M = 0.5 * (M + M.T)
    scale = np.linalg.norm(M)
    if scale == 0 or not np.isfinite(scale):
        return None, False
    A = M / scale
    v = np.random.default_rng(seed).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        Av = A @ v
        resid = np.linalg.norm(Av - (v @ Av) * v)
        if resid <= tol:
            return v, True
        v = Av + v
        v /= np.linalg.norm(v)
    return None, False


def random_plane_init(tw, X, n_planes: int, seed=0):
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    best, best_val = None, -np.inf
    for _ in range(n_planes):
        v = rng.standard_normal(X.shape[1])
        plane = Hyperplane(v, _median_offset(X, v))
        val = subproblem_value(plane, tw, X)
        if val > best_val:
            best, best_val = plane, val
    return best


def stump_init(tw, X):
    """Best axis-aligned threshold, searching midpoints between distinct values.

    A pair ``(i, u)`` is split by threshold index ``r`` exactly when ``r``
    lies between the value ranks of ``x_i`` and ``x_u``, so all thresholds of
    a dimension are scored with one difference array.
    """
    pw = tw.pairs()
    X = np.asarray(X, dtype=np.float64)
    best, best_val = None, -np.inf
    for d in range(X.shape[1]):
        uniq, rank = np.unique(X[:, d], return_inverse=True)
        if uniq.size < 2:
            continue
        ra, ro = rank[pw.anchor], rank[pw.other]
        lo, hi = np.minimum(ra, ro), np.maximum(ra, ro)
        diff = np.bincount(lo, weights=pw.weight, minlength=uniq.size + 1)
        diff -= np.bincount(hi, weights=pw.weight, minlength=uniq.size + 1)
        vals = np.cumsum(diff)[: uniq.size - 1]
        r = int(np.argmax(vals))
        if vals[r] > best_val:
            v = np.zeros(X.shape[1])
            v[d] = 1.0
            best = Hyperplane(v, -0.5 * (uniq[r] + uniq[r + 1]))
            best_val = vals[r]
    return best


def _refine(plane: Hyperplane, tw, X, cfg: HashLearnConfig):
    d = X.shape[1]

    def fun_grad(theta):
        val, gv, gb = smoothed_value_and_gradient(theta[:d], theta[d], tw, X, cfg)
        return -val, -np.append(gv, gb)

    x0 = np.append(plane.v, plane.b)
    if cfg.optimizer == "quasi-newton":
        res = optim.lbfgs(fun_grad, x0, memory=10, max_iter=cfg.max_opt_iters, grad_tol=cfg.grad_tol)
    else:
        res = optim.gradient_descent(fun_grad, x0, max_iter=cfg.max_opt_iters, grad_tol=cfg.grad_tol)
    if not np.all(np.isfinite(res.x)) or not np.any(res.x[:d]):
        return None
    v, b = res.x[:d], res.x[d]
    if cfg.balanced:
        b = _median_offset(X, v)
    return Hyperplane(v, b)


@dataclass
class LearnInfo:
    source: str
    value: float
    spectral_ok: bool
    refined_ok: bool
    candidates: dict = field(default_factory=dict)


def learn_hash_function(tw, X, cfg: HashLearnConfig = HashLearnConfig(), seed=None):
    """Best plane among the initialisers and their smooth refinements.

    Returns ``(plane, info)``. ``info.refined_ok`` is False when every
    refinement failed and a raw initialiser was returned.
    """
    X = np.asarray(X, dtype=np.float64)
    seed = cfg.seed if seed is None else seed
    pw = tw.pairs()
    spectral, spectral_ok = spectral_init(pw, X, seed=seed)
    inits = []
    if spectral_ok:
        inits.append(("spectral", spectral))
    else:
        log.debug("spectral initialisation unavailable, relying on other initialisers")
    if cfg.n_random_planes > 0:
        inits.append(("random", random_plane_init(pw, X, cfg.n_random_planes, seed=seed)))
    stump = stump_init(pw, X)
    if stump is not None:
        inits.append(("stump", stump))
    if not inits:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(X.shape[1])
        inits.append(("random", Hyperplane(v, _median_offset(X, v))))

    pool = list(inits)
    refined_ok = False
    for name, plane in inits:
        refined = _refine(plane, pw, X, cfg)
        if refined is not None:
            pool.append((name + "+opt", refined))
            refined_ok = True
    values = [subproblem_value(plane, pw, X) for _, plane in pool]
    best = int(np.argmax(values))
    info = LearnInfo(
        pool[best][0], values[best], spectral_ok, refined_ok,
        {name: val for (name, _), val in zip(pool, values)},
    )
    return pool[best][1], info


# ---------------------------------------------------------------------------
# model


@dataclass
class HashModel:
    """Learned planes and bit weights, plus the feature preprocessing."""

    V: np.ndarray  # (bits, dims)
    offsets: np.ndarray
    w: np.ndarray
    standardization: Standardization | None = None
    kernel: KernelMap | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=np.float64)
        if self.V.ndim != 2:
            raise ValueError("plane normals must form a (bits, dims) array")
        self.offsets = np.asarray(self.offsets, dtype=np.float64).reshape(-1)
        self.w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if not (self.V.shape[0] == self.offsets.size == self.w.size):
            raise ValueError("planes, offsets and weights must have the same length")
        if np.any(self.w < 0):
            raise ValueError("bit weights must be non-negative")

    @classmethod
    def from_planes(cls, planes, w, **kw):
        V = np.stack([p.v for p in planes]) if planes else np.zeros((0, 0))
        return cls(V, np.array([p.b for p in planes]), w, **kw)

    @property
    def bits(self) -> int:
        return self.offsets.size

    @property
    def input_dims(self) -> int:
        if self.standardization is not None:
            return self.standardization.mean.size
        if self.kernel is not None:
            return self.kernel.anchors.shape[1]
        return self.V.shape[1]

    @property
    def planes(self) -> list:
        return [Hyperplane(v, b) for v, b in zip(self.V, self.offsets)]

    def features(self, values) -> np.ndarray:
        """Apply the stored standardization and kernel map to raw rows."""
        X = np.asarray(values, dtype=np.float64)
        if self.standardization is not None:
            X = self.standardization.apply(X)
        if self.kernel is not None:
            X = self.kernel.transform(X)
        return X

    def hash_features(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != self.V.shape[1]:
            raise ValueError(f"model expects {self.V.shape[1]} feature dims, got {X.shape[1]}")
        return (X @ self.V.T + self.offsets >= 0).astype(np.uint8)

    # -- serialisation

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "standardization": None if self.standardization is None else {
                "mean": self.standardization.mean.tolist(),
                "scale": self.standardization.scale.tolist(),
            },
            "kernel": None if self.kernel is None else {
                "bandwidth": self.kernel.bandwidth,
                "anchor_indices": list(self.kernel.anchor_indices),
                "anchors": self.kernel.anchors.tolist(),
            },
            "planes": [{"v": v.tolist(), "b": float(b)} for v, b in zip(self.V, self.offsets)],
            "weights": self.w.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HashModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a structhash model file")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        std = doc.get("standardization")
        ker = doc.get("kernel")
        planes = doc["planes"]
        dims = len(planes[0]["v"]) if planes else 0
        return cls(
            np.array([p["v"] for p in planes], dtype=np.float64).reshape(len(planes), dims),
            np.array([p["b"] for p in planes], dtype=np.float64),
            np.array(doc["weights"], dtype=np.float64),
            standardization=None if std is None else Standardization(np.array(std["mean"]), np.array(std["scale"])),
            kernel=None if ker is None else KernelMap(
                np.array(ker["anchors"], dtype=np.float64), ker["bandwidth"], tuple(ker["anchor_indices"])
            ),
            meta=doc.get("meta", {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "HashModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# training driver


@dataclass
class TrainingTrace:
    bits: list = field(default_factory=list)
    converged: bool = True
    failed: str | None = None


def train_structhash(X, queries, spec: MeasureSpec, bits: int,
                     solver_cfg: SolverConfig = SolverConfig(),
                     hash_cfg: HashLearnConfig = HashLearnConfig()):
    """Learn ``bits`` hash functions and their weights by column generation.

    ``X`` holds preprocessed training features and ``queries`` the sampled
    neighbourhoods (indices into ``X``). The first bit uses uniform triplet
    weights; every later bit uses the duals of the previous cutting-plane
    solve. Returns ``(model, trace)`` where the model carries no
    preprocessing; a solver failure returns the bits learned so far.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    for gt in queries:
        if not gt.usable:
            raise ValueError(f"query {gt.query}: both neighbour sets must be non-empty")
    planes, w, ws = [], np.zeros(0), None
    trace = TrainingTrace()
    codes = np.zeros((n, 0), dtype=np.uint8)
    for bit in range(bits):
        tw = uniform_pair_weights(queries, n) if ws is None else pair_weights(ws, queries, n)
        if len(tw) == 0:
            tw = uniform_pair_weights(queries, n)
        plane, info = learn_hash_function(tw, X, hash_cfg, seed=hash_cfg.seed + bit)
        try:
            new_codes = np.hstack([codes, plane(X)[:, None]])
            result = train_w(new_codes, queries, spec, solver_cfg, warm=ws)
        except SolverError as exc:
            log.error("solver failed at bit %d: %s", bit + 1, exc)
            trace.failed = str(exc)
            trace.converged = False
            break
        planes.append(plane)
        codes = new_codes
        w, ws = result.solution.w, result.working_set
        trace.converged &= result.converged
        trace.bits.append({
            "bit": bit + 1,
            "init": info.source,
            "subproblem_value": info.value,
            "spectral_ok": info.spectral_ok,
            "refined_ok": info.refined_ok,
            "cp_iterations": result.iterations,
            "converged": result.converged,
            "objective": result.solution.objective,
            "xi": result.solution.xi,
            "working_set": len(ws),
            "nonzero_w": int(np.count_nonzero(w)),
            "cp_objectives": result.objectives,
            "cp_trace": result.trace,
        })
        log.info("bit %d: %s value %.4g, %d cp iters, obj %.5g", bit + 1, info.source, info.value, result.iterations, result.solution.objective)
    return HashModel.from_planes(planes, w), trace
