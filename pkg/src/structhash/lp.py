"""Dense tableau simplex for the restricted master problem.

The master is

    min  sum(w) + C xi   s.t.  a_t . w + xi >= b_t,  w >= 0,  xi >= 0

and is solved through its dual

    max  sum_t lam_t b_t   s.t.  sum_t lam_t a_t <= 1,  sum_t lam_t <= C,  lam >= 0,

whose right-hand side is non-negative, so the slack basis is feasible and
no phase one is needed. The primal ``(w, xi)`` are the shadow prices of the
final basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-11


class SolverError(RuntimeError):
    """The LP could not be solved to the requested accuracy."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass
class MasterSolution:
    w: np.ndarray
    xi: float
    duals: np.ndarray
    objective: float
    dual_objective: float

    @property
    def gap(self) -> float:
        return abs(self.objective - self.dual_objective)


def simplex_max(c, A, rhs, max_iter=10_000):
    """Maximise ``c.x`` s.t. ``A x <= rhs``, ``x >= 0`` with ``rhs >= 0``.

    Uses Bland's rule, so it terminates on degenerate problems. Returns
    ``(x, y, basis)`` where ``y`` are the row duals. Raises
    :class:`SolverError` on unboundedness or when the iteration cap is hit.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    m, n = A.shape
    if np.any(rhs < 0):
        raise ValueError("simplex_max needs a non-negative right-hand side")
    full = np.hstack([A, np.eye(m)])
    cost = np.concatenate([c, np.zeros(m)])
    tab = np.hstack([full, rhs[:, None]])
    basis = np.arange(n, n + m)

    for _ in range(max_iter):
        y = _row_duals(tab, cost, basis, full)
        reduced = cost - y @ full
        entering = np.flatnonzero(reduced > PIVOT_TOL)
        if entering.size == 0:
            break
        col = entering[0]
        column = tab[:, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            raise SolverError("LP is unbounded", {"column": int(col)})
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        cands = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        leave = cands[np.argmin(basis[cands])]
        tab[leave] /= tab[leave, col]
        others = np.arange(m) != leave
        tab[others] -= np.outer(tab[others, col], tab[leave])
        basis[leave] = col
    else:
        raise SolverError("simplex iteration cap reached", {"basis": basis.tolist()})

    # re-solve on the final basis for clean values
    B = full[:, basis]
    x_b = np.linalg.solve(B, rhs)
    y = np.linalg.solve(B.T, cost[basis])
    x = np.zeros(n + m)
    x[basis] = x_b
    return x[:n], y, basis


def _row_duals(tab, cost, basis, full):
    # tab[:, :-1] == B^{-1} full, so B^{-1} is the slack block
    m = tab.shape[0]
    binv = tab[:, full.shape[1] - m:full.shape[1]]
    return cost[basis] @ binv


def solve_restricted_master(a, b, C: float = 1.0, lp_tol: float = 1e-8, dims: int | None = None) -> MasterSolution:
    """Exact optimum of the 1-slack master over the working-set rows ``(a_t, b_t)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size == 0:
        d = dims if dims is not None else (a.shape[1] if a.ndim == 2 else 0)
        return MasterSolution(np.zeros(d), 0.0, np.zeros(0), 0.0, 0.0)
    a = a.reshape(b.size, -1)
    if dims is not None and a.shape[1] != dims:
        raise ValueError(f"working-set vectors have {a.shape[1]} dims, expected {dims}")
    T, D = a.shape
    rows = np.vstack([a.T, np.ones((1, T))])
    rhs = np.concatenate([np.ones(D), [C]])
    lam, y, basis = simplex_max(b, rows, rhs)
    lam = np.maximum(lam, 0.0)
    y = np.maximum(y, 0.0)
    w, xi = y[:D], float(y[D])
    primal = float(w.sum() + C * xi)
    dual = float(lam @ b)
    sol = MasterSolution(w, xi, lam, primal, dual)
    if sol.gap > lp_tol * max(1.0, abs(primal)):
        raise SolverError(
            f"duality gap {sol.gap:.3e} exceeds {lp_tol:.1e}",
            {"a": a.tolist(), "b": b.tolist(), "C": C, "w": w.tolist(), "xi": xi, "lambda": lam.tolist(), "basis": basis.tolist()},
        )
    return sol
