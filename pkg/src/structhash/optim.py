"""Small unconstrained minimisers used for the hash-function subproblem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def _backtrack(fun_grad, x, f, g, direction, step=1.0, c1=1e-4, shrink=0.5, max_halvings=40):
    slope = g @ direction
    for _ in range(max_halvings):
        x_new = x + step * direction
        f_new, g_new = fun_grad(x_new)
        if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
            return x_new, f_new, g_new, step
        step *= shrink
    return None


def lbfgs(fun_grad, x0, memory=10, max_iter=200, grad_tol=1e-6) -> OptimizeResult:
    """Limited-memory BFGS (two-loop recursion) with Armijo backtracking."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun_grad(x)
    s_hist, y_hist = [], []
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g, np.inf) <= grad_tol:
            return OptimizeResult(x, f, it - 1, True)
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a))
        if s_hist:
            q *= (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
        else:
            q /= max(1.0, np.linalg.norm(g))
        for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
            q += (a - rho * (y @ q)) * s
        direction = -q
        if g @ direction >= 0:
            # lost descent: restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            direction = -g / max(1.0, np.linalg.norm(g))
        found = _backtrack(fun_grad, x, f, g, direction)
        if found is None:
            return OptimizeResult(x, f, it, False)
        x_new, f_new, g_new, _ = found
        s, y = x_new - x, g_new - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        if abs(f - f_new) <= 1e-15 * max(1.0, abs(f)):
            return OptimizeResult(x_new, f_new, it, True)
        x, f, g = x_new, f_new, g_new
    return OptimizeResult(x, f, max_iter, False)


def gradient_descent(fun_grad, x0, step=1e-2, max_iter=200, grad_tol=1e-6) -> OptimizeResult:
    """Fixed-step steepest descent; only accepts steps that do not increase ``f``."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun_grad(x)
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g, np.inf) <= grad_tol:
            return OptimizeResult(x, f, it - 1, True)
        x_new = x - step * g
        f_new, g_new = fun_grad(x_new)
        if not f_new <= f:
            return OptimizeResult(x, f, it, False)
        x, f, g = x_new, f_new, g_new
    return OptimizeResult(x, f, max_iter, False)
