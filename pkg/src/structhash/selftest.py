"""Desk-scale consistency checks runnable from the command line."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import inference, measures
from .data import QueryNeighborhood
from .hashing import PairWeights, smoothed_value_and_gradient
from .lp import solve_restricted_master
from .measures import MeasureSpec

ORACLE_SPECS = (
    MeasureSpec("auc"),
    MeasureSpec("pak", 3),
    MeasureSpec("ndcg", 3, "ideal"),
    MeasureSpec("ndcg", 3, "literal"),
    MeasureSpec("map"),
)

TIME_BUDGET = 300.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_instance(rng, max_rel=3, max_irr=4, bits=8, min_total=3):
    """Random query neighbourhood over random codes; the query is row 0."""
    p = int(rng.integers(1, max_rel + 1))
    q = int(rng.integers(1, max_irr + 1))
    while p + q < min_total:
        q += 1
    n = p + q + 1
    codes = rng.integers(0, 2, size=(n, bits)).astype(np.uint8)
    perm = rng.permutation(np.arange(1, n))
    gt = QueryNeighborhood(0, np.sort(perm[:p]), np.sort(perm[p:]))
    w = rng.exponential(1.0, bits) * rng.choice([0.02, 0.2, 1.0])
    w[rng.random(bits) < 0.25] = 0.0
    return codes, gt, w


def check_oracle(n_instances=200, seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        codes, gt, w = random_instance(rng)
        for spec in ORACLE_SPECS:
            fast = inference.infer_most_violated(spec, w, codes, gt)
            ref = inference.brute_force_most_violated(spec, w, codes, gt)
            worst = max(worst, abs(fast.objective - ref.objective))
    return CheckResult("oracle-equivalence", worst <= 1e-9, f"max |objective diff| = {worst:.2e}")


def check_delta_psi(n_instances=100, seed=1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        codes, gt, _ = random_instance(rng)
        cand = np.concatenate([gt.relevant, gt.irrelevant])
        y = rng.permutation(cand)
        direct = inference.psi(measures.true_ranking(gt), codes, gt) - inference.psi(y, codes, gt)
        worst = max(worst, float(np.abs(direct - inference.delta_psi(y, codes, gt)).max()))
    return CheckResult("delta-psi", worst <= 1e-12, f"max error = {worst:.2e}")


def random_working_set(rng, max_entries=30, max_dims=32):
    T = int(rng.integers(1, max_entries + 1))
    D = int(rng.integers(1, max_dims + 1))
    a = rng.normal(size=(T, D)) * rng.choice([0.1, 1.0, 3.0])
    if rng.random() < 0.3:
        a = np.round(a)
    b = rng.uniform(0, 1, T)
    C = float(rng.choice([0.5, 1.0, 10.0]))
    return a, b, C


def lp_violations(a, b, C, sol) -> dict:
    slack = a @ sol.w + sol.xi - b
    return {
        "gap": sol.gap,
        "feasibility": float(-min(slack.min(), sol.w.min(initial=0.0), sol.xi)),
        "slackness": float(np.max(sol.duals * slack)),
        "dual_sum": float(sol.duals.sum() - C),
        "dual_rows": float((sol.duals @ a).max() - 1.0),
        "dual_sign": float(-sol.duals.min()),
    }


def check_lp(n_instances=100, seed=2) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n_instances):
        a, b, C = random_working_set(rng)
        v = lp_violations(a, b, C, solve_restricted_master(a, b, C))
        if v["gap"] > 1e-8 or v["feasibility"] > 1e-8 or v["slackness"] > 1e-6 or max(
            v["dual_sum"], v["dual_rows"], v["dual_sign"]
        ) > 1e-8:
            bad += 1
    return CheckResult("lp-duality", bad == 0, f"{bad}/{n_instances} working sets violate a condition")


def random_subproblem(rng, n=20, d=4, n_pairs=40):
    X = rng.standard_normal((n, d))
    anchor = rng.integers(0, n, n_pairs)
    other = (anchor + rng.integers(1, n, n_pairs)) % n
    weight = rng.normal(size=n_pairs)
    pw = PairWeights.aggregate(anchor, other, weight, n)
    v = rng.standard_normal(d) * 0.3
    b = float(rng.normal() * 0.3)
    return X, pw, v, b


def gradient_error(X, pw, v, b, cfg=None, step=1e-5) -> float:
    from .hashing import HashLearnConfig

    cfg = cfg or HashLearnConfig()
    _, gv, gb = smoothed_value_and_gradient(v, b, pw, X, cfg)
    grad = np.append(gv, gb)
    theta = np.append(v, b)
    d = v.size
    fd = np.zeros_like(theta)
    for t in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[t] += step
        dn[t] -= step
        fu = smoothed_value_and_gradient(up[:d], up[d], pw, X, cfg)[0]
        fl = smoothed_value_and_gradient(dn[:d], dn[d], pw, X, cfg)[0]
        fd[t] = (fu - fl) / (2 * step)
    return float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), np.linalg.norm(grad), 1e-12))


def check_gradient(n_instances=50, seed=3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = max(gradient_error(*random_subproblem(rng)) for _ in range(n_instances))
    return CheckResult("gradient-check", worst <= 1e-4, f"max relative error = {worst:.2e}")


def _gt(rel, irr):
    return QueryNeighborhood(0, rel, irr)


def check_metric_values() -> CheckResult:
    s3 = 1.0 / math.log2(3)
    gt = _gt([1, 2], [3, 4])
    cases = [
        ("ndcg-ideal", measures.score_ndcg([1, 3, 2, 4], gt, 3), (1 + s3) / 2),
        ("ndcg-literal", measures.score_ndcg([1, 3, 2, 4], gt, 3, "literal"), (1 + s3) / (2 + s3)),
        ("map", measures.score_map([1, 3, 2, 4], gt), 5 / 6),
        ("auc", measures.score_auc([1, 3, 2, 4], gt), 3 / 4),
        ("p@3", measures.score_precision_at_k([3, 1, 2, 4], gt, 3), 2 / 3),
    ]
    wrong = [name for name, got, want in cases if abs(got - want) > 1e-9]
    return CheckResult("metric-values", not wrong, "mismatch: " + ", ".join(wrong) if wrong else "all hand values reproduced")


def check_metric_properties(n_instances=100, seed=4) -> CheckResult:
    rng = np.random.default_rng(seed)
    problems = []
    for _ in range(n_instances):
        _, gt, _ = random_instance(rng, max_rel=5, max_irr=6)
        y = rng.permutation(np.concatenate([gt.relevant, gt.irrelevant]))
        auc = measures.score_auc(y, gt)
        if abs(measures.score_auc(y[::-1], gt) - (1 - auc)) > 1e-12:
            problems.append("auc-reversal")
        for spec in ORACLE_SPECS:
            s = measures.score(spec, y, gt)
            if not 0 <= s <= 1:
                problems.append(f"{spec.kind}-range")
            # a perfect ranking scores 1 except P@K with fewer than K relevant items
            if spec.kind != "pak" and spec.ndcg_normalizer == "ideal":
                if abs(measures.label_loss(spec, measures.true_ranking(gt), measures.true_ranking(gt), gt)) > 1e-12:
                    problems.append(f"{spec.kind}-self-loss")
    problems = sorted(set(problems))
    return CheckResult("metric-properties", not problems, ", ".join(problems) or "ok")


SUITES = (check_metric_values, check_metric_properties, check_oracle, check_delta_psi, check_lp, check_gradient)


def run_selftest(report=print) -> list:
    start = time.perf_counter()
    results = []
    for suite in SUITES:
        res = suite()
        results.append(res)
        report(f"{'PASS' if res.passed else 'FAIL'}  {res.name:<20} {res.detail}")
    elapsed = time.perf_counter() - start
    if elapsed > TIME_BUDGET:
        warnings.warn(f"selftest took {elapsed:.0f}s, over the {TIME_BUDGET:.0f}s budget")
    report(f"selftest finished in {elapsed:.1f}s")
    return results
