"""1-slack cutting-plane training of the bit weights ``w``."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .inference import build_batches, infer_batch
from .lp import MasterSolution, solve_restricted_master
from .measures import MeasureSpec

log = logging.getLogger(__name__)

POSITIVE_TOL = 1e-12
PRUNE_AFTER = 10


@dataclass
class SolverConfig:
    C: float = 10.0
    eps_cp: float = 1e-3
    max_cp_iters: int = 100
    lp_tol: float = 1e-8
    threads: int = 1

    def __post_init__(self):
        for name in ("C", "eps_cp", "max_cp_iters", "lp_tol", "threads"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class WorkingSetEntry:
    """One aggregated constraint ``a . w + xi >= b``.

    ``rankings[i]`` is the most violated ordering of query ``i`` (``None``
    where ``c[i]`` is 0); it lets ``a`` be recomputed when bits are added.
    """

    a: np.ndarray
    b: float
    c: np.ndarray
    rankings: list
    lam: float = 0.0
    idle: int = 0


@dataclass
class WorkingSet:
    entries: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def matrix(self, dims: int):
        if not self.entries:
            return np.zeros((0, dims)), np.zeros(0)
        return np.stack([e.a for e in self.entries]), np.array([e.b for e in self.entries])

    def refresh(self, codes, queries) -> "WorkingSet":
        """Recompute every ``a`` for the current codes (e.g. after adding a bit)."""
        codes = np.asarray(codes, dtype=np.float64)
        m = len(queries)
        out = []
        for e in self.entries:
            total = np.zeros(codes.shape[1])
            for i in np.flatnonzero(e.c):
                total += _delta_psi_from_order(codes, queries[i], e.rankings[i])
            out.append(WorkingSetEntry(total / m, e.b, e.c, e.rankings, e.lam, e.idle))
        return WorkingSet(out)


def _delta_psi_from_order(codes, gt, order):
    order = np.asarray(order)
    is_rel = np.isin(order, gt.relevant)
    d = np.abs(codes[order] - codes[gt.query])
    irr_before = np.cumsum(~is_rel)
    cum_d = np.cumsum(np.where(is_rel[:, None], 0.0, d), axis=0)
    total = (cum_d[is_rel] - irr_before[is_rel][:, None] * d[is_rel]).sum(axis=0)
    return 2.0 * total / (gt.relevant.size * gt.irrelevant.size)


@dataclass
class PerQuery:
    """Loss-augmented inference outcome for every training query."""

    orders: list
    objectives: np.ndarray
    losses: np.ndarray
    dpsi: np.ndarray


def infer_all(spec: MeasureSpec, batches, w, m: int, threads: int = 1) -> PerQuery:
    bits = batches[0].d_rel.shape[2]
    orders = [None] * m
    objectives = np.zeros(m)
    losses = np.zeros(m)
    dpsi = np.zeros((m, bits))

    def run(batch):
        return batch, infer_batch(spec, batch, w)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, batches))
    else:
        results = [run(b) for b in batches]
    for batch, res in results:
        objectives[batch.members] = res.objectives
        losses[batch.members] = res.losses
        dpsi[batch.members] = res.dpsi
        for g, member in enumerate(batch.members):
            orders[member] = res.orders[g]
    return PerQuery(orders, objectives, losses, dpsi)


def aggregate_violation(per_query: PerQuery, w, xi: float):
    """Combine per-query violators into one constraint; returns ``(entry, violation)``."""
    m = per_query.objectives.size
    c = per_query.objectives > POSITIVE_TOL
    a = per_query.dpsi[c].sum(axis=0) / m if c.any() else np.zeros(per_query.dpsi.shape[1])
    b = float(per_query.losses[c].sum() / m)
    rankings = [per_query.orders[i] if c[i] else None for i in range(m)]
    violation = b - float(np.asarray(w) @ a) - xi
    return WorkingSetEntry(a, b, c, rankings), violation


@dataclass
class TrainResult:
    solution: MasterSolution
    working_set: WorkingSet
    converged: bool
    iterations: int
    objectives: list
    trace: list


def train_w(codes, queries, spec: MeasureSpec, cfg: SolverConfig = SolverConfig(), warm: WorkingSet | None = None) -> TrainResult:
    """Cutting-plane loop: infer, aggregate, add the cut, re-solve the master.

    ``warm`` is a working set from an earlier call; its constraint vectors are
    recomputed for the current ``codes`` before use.
    """
    codes = np.asarray(codes)
    if codes.ndim != 2 or codes.shape[1] == 0:
        raise ValueError("codes must be a non-empty (rows, bits) array")
    dims = codes.shape[1]
    m = len(queries)
    batches = build_batches(codes, queries)
    ws = warm.refresh(codes, queries) if warm is not None else WorkingSet()

    def solve():
        a, b = ws.matrix(dims)
        sol = solve_restricted_master(a, b, cfg.C, cfg.lp_tol, dims=dims)
        for e, lam in zip(ws.entries, sol.duals):
            e.lam = float(lam)
            e.idle = e.idle + 1 if lam <= 0 else 0
        return sol

    sol = solve()
    objectives = [sol.objective]
    trace = []
    converged = False
    iterations = 0
    while iterations < cfg.max_cp_iters:
        iterations += 1
        per_query = infer_all(spec, batches, sol.w, m, cfg.threads)
        entry, violation = aggregate_violation(per_query, sol.w, sol.xi)
        trace.append((iterations, violation, sol.xi, sol.objective, len(ws)))
        log.debug("cp iter %d violation %.3e xi %.4g obj %.6g |ws| %d", *trace[-1])
        if violation <= cfg.eps_cp:
            converged = True
            break
        # rows idle for PRUNE_AFTER solves had zero dual last time; dropping them
        # cannot lower the next optimum below the current one
        ws.entries = [e for e in ws.entries if e.idle < PRUNE_AFTER]
        ws.entries.append(entry)
        sol = solve()
        objectives.append(sol.objective)
    if not converged:
        log.warning("cutting plane stopped after %d iterations without converging", iterations)
    return TrainResult(sol, ws, converged, iterations, objectives, trace)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("STRUCTHASH_THREADS", "1")))
    except ValueError:
        return 1
