"""Release criteria, one check each, at their stated sizes and tolerances.

Every check prints a single PASS/FAIL line. Run directly with
``python tests/test_acceptance.py`` or through pytest, which repeats the
lines in its terminal summary.
"""

import functools
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import mixture  # noqa: E402

from structhash import cli, inference, measures  # noqa: E402
from structhash.data import QueryNeighborhood, write_csv  # noqa: E402
from structhash.inference import brute_force_most_violated, delta_psi, infer_most_violated, psi  # noqa: E402
from structhash.lp import solve_restricted_master  # noqa: E402
from structhash.measures import MeasureSpec  # noqa: E402
from structhash.pipeline import TrainConfig, evaluate_model, fit, query_ground_truth  # noqa: E402
from structhash.retrieval import CodeMatrix, lsh_baseline, weighted_distances  # noqa: E402
from structhash.selftest import gradient_error, lp_violations, random_instance, random_subproblem, random_working_set  # noqa: E402
from structhash.solver import SolverConfig, train_w  # noqa: E402

RESULTS = []

# pilot run of the benchmark below (seeded, this configuration): structhash 0.9795, LSH 0.9309
BENCH_NDCG_FLOOR = 0.90
BENCH_C = 10.0


def report(name, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {name:<28} {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def oracle_equivalence():
    specs = [MeasureSpec("auc"), MeasureSpec("pak", 3), MeasureSpec("ndcg", 3, "ideal"),
             MeasureSpec("ndcg", 3, "literal"), MeasureSpec("map")]
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        codes, gt, w = random_instance(rng, max_rel=3, max_irr=4, bits=8, min_total=3)
        for spec in specs:
            fast = infer_most_violated(spec, w, codes, gt).objective
            ref = brute_force_most_violated(spec, w, codes, gt).objective
            worst = max(worst, abs(fast - ref))
    elapsed = time.perf_counter() - start
    return report("oracle-equivalence", worst <= 1e-9 and elapsed <= 60,
                  f"200 instances x 5 measures, max diff {worst:.1e} (tol 1e-9), {elapsed:.1f}s (limit 60s)")


def delta_psi_consistency():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        codes, gt, _ = random_instance(rng, max_rel=5, max_irr=5, bits=16)
        y = rng.permutation(np.concatenate([gt.relevant, gt.irrelevant]))
        direct = psi(measures.true_ranking(gt), codes, gt) - psi(y, codes, gt)
        worst = max(worst, float(np.abs(direct - delta_psi(y, codes, gt)).max()))
    return report("delta-psi-consistency", worst <= 1e-12, f"100 instances, max error {worst:.1e} (tol 1e-12)")


def lp_correctness():
    rng = np.random.default_rng(11)
    worst = dict.fromkeys(("gap", "feasibility", "slackness", "dual"), 0.0)
    for _ in range(100):
        a, b, C = random_working_set(rng, max_entries=30, max_dims=32)
        v = lp_violations(a, b, C, solve_restricted_master(a, b, C))
        worst["gap"] = max(worst["gap"], v["gap"])
        worst["feasibility"] = max(worst["feasibility"], v["feasibility"])
        worst["slackness"] = max(worst["slackness"], v["slackness"])
        worst["dual"] = max(worst["dual"], v["dual_sum"], v["dual_rows"], v["dual_sign"])
    ok = (worst["gap"] <= 1e-8 and worst["feasibility"] <= 1e-8 and worst["slackness"] <= 1e-6
          and worst["dual"] <= 1e-8)
    return report("lp-correctness", ok, "100 working sets, " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


@functools.lru_cache(maxsize=None)
def benchmark_run():
    X, y = mixture(500, 1)
    Q, yq = mixture(200, 2)
    cfg = TrainConfig(loss="ndcg", k=10, bits=16, C=BENCH_C, seed=0)
    start = time.perf_counter()
    model, trace = fit(X, y, cfg)
    gts = query_ground_truth(Q, X, yq, y)
    ours = evaluate_model(model, Q, X, gts, [10]).means["ndcg@10"]
    lsh_model = lsh_baseline(2, 16, seed=0, standardization=model.standardization)
    lsh = evaluate_model(lsh_model, Q, X, gts, [10]).means["ndcg@10"]
    return trace, ours, lsh, time.perf_counter() - start


def cutting_plane_monotone():
    runs = []
    rng = np.random.default_rng(3)
    for kind in ("auc", "pak", "ndcg", "map"):
        for _ in range(5):
            n, bits = 40, int(rng.integers(2, 9))
            codes = rng.integers(0, 2, (n, bits))
            queries = []
            for i in range(15):
                others = rng.permutation(np.delete(np.arange(n), i))
                p = int(rng.integers(1, 6))
                queries.append(QueryNeighborhood(i, np.sort(others[:p]), np.sort(others[p:p + 6])))
            spec = MeasureSpec(kind, 3 if kind in ("pak", "ndcg") else None)
            res = train_w(codes, queries, spec, SolverConfig(C=float(rng.choice([1.0, 10.0, 100.0]))))
            runs.append((res.objectives, res.converged, res.iterations))
    trace = benchmark_run()[0]
    runs += [(b["cp_objectives"], b["converged"], b["cp_iterations"]) for b in trace.bits]
    drops = min(float(np.diff(o).min()) if len(o) > 1 else 0.0 for o, _, _ in runs)
    converged = all(c and it <= 100 for _, c, it in runs)
    return report("cutting-plane", drops >= -1e-9 and converged,
                  f"{len(runs)} runs, largest objective drop {max(0.0, -drops):.1e}, "
                  f"all converged within 100 iterations: {converged}")


def gradient_check():
    rng = np.random.default_rng(5)
    worst = max(gradient_error(*random_subproblem(rng, n=int(rng.integers(5, 40)), d=int(rng.integers(1, 8))))
                for _ in range(50))
    return report("gradient-check", worst <= 1e-4, f"50 instances, max relative error {worst:.1e} (tol 1e-4)")


def metric_hand_values():
    s3 = 1 / np.log2(3)
    gt = QueryNeighborhood(0, [1, 2], [3, 4])
    y = [1, 3, 2, 4]
    cases = {
        "ndcg-ideal 0.8155": (measures.score_ndcg(y, gt, 3), (1 + s3) / 2),
        "ndcg-literal 0.6199": (measures.score_ndcg(y, gt, 3, "literal"), (1 + s3) / (2 + s3)),
        "map 5/6": (measures.score_map(y, gt), 5 / 6),
        "auc 3/4": (measures.score_auc(y, gt), 3 / 4),
    }
    errors = {k: abs(got - want) for k, (got, want) in cases.items()}
    rounded = abs(cases["ndcg-ideal 0.8155"][0] - 0.8155) < 5e-5 and abs(cases["ndcg-literal 0.6199"][0] - 0.6199) < 5e-5
    ok = max(errors.values()) <= 1e-9 and rounded
    return report("metric-hand-values", ok, f"max error {max(errors.values()):.1e} (tol 1e-9) over " + ", ".join(cases))


def end_to_end_benchmark():
    trace, ours, lsh, elapsed = benchmark_run()
    ok = trace.converged and ours >= BENCH_NDCG_FLOOR and ours >= lsh and elapsed <= 300
    return report("end-to-end-benchmark", ok,
                  f"converged {trace.converged}, NDCG@10 {ours:.4f} (floor {BENCH_NDCG_FLOOR}), "
                  f"LSH {lsh:.4f}, {elapsed:.0f}s (limit 300s)")


def determinism(tmp):
    X, y = mixture(500, 1)
    write_csv(tmp / "train.csv", X, y)
    paths = []
    for name in ("first.json", "second.json"):
        code = cli.main(["train", "--data", str(tmp / "train.csv"), "--label-column", "--model", str(tmp / name),
                         "--loss", "ndcg", "--k", "10", "--bits", "4", "--seed", "3"])
        assert code == 0
        paths.append(tmp / name)
    same = paths[0].read_bytes() == paths[1].read_bytes()
    return report("determinism", same, f"two cmd_train runs, model files identical: {same}")


def weighted_hamming_metric():
    rng = np.random.default_rng(9)
    bits = 64
    w = rng.exponential(size=bits)
    A, B, Cc = (rng.integers(0, 2, (10_000, bits)).astype(np.uint8) for _ in range(3))

    def dist(P, R):
        return (P != R) @ w

    d_ab, d_ba, d_bc, d_ac, d_aa = dist(A, B), dist(B, A), dist(B, Cc), dist(A, Cc), dist(A, A)
    packed = np.array([weighted_distances(CodeMatrix.from_bits(A[i:i + 1]), CodeMatrix.from_bits(B[i:i + 1]), w)[0]
                       for i in range(0, 10_000, 97)])
    ok = (np.all(d_aa == 0) and np.array_equal(d_ab, d_ba) and np.all(d_ac <= d_ab + d_bc + 1e-12)
          and np.allclose(packed, d_ab[::97], atol=1e-12))
    return report("weighted-hamming-metric", ok, "10^4 pairs/triples at 64 bits: identity, symmetry, triangle")


def test_oracle_equivalence():
    assert oracle_equivalence()


def test_delta_psi_consistency():
    assert delta_psi_consistency()


def test_lp_correctness():
    assert lp_correctness()


def test_cutting_plane_monotone_and_converges():
    assert cutting_plane_monotone()


def test_gradient_check():
    assert gradient_check()


def test_metric_hand_values():
    assert metric_hand_values()


def test_end_to_end_benchmark():
    assert end_to_end_benchmark()


def test_determinism(tmp_path):
    assert determinism(tmp_path)


def test_weighted_hamming_metric():
    assert weighted_hamming_metric()


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        checks = [oracle_equivalence, delta_psi_consistency, lp_correctness, cutting_plane_monotone,
                  gradient_check, metric_hand_values, end_to_end_benchmark,
                  lambda: determinism(Path(tmp)), weighted_hamming_metric]
        outcomes = [check() for check in checks]
    print(f"{sum(outcomes)}/{len(outcomes)} criteria passed")
    sys.exit(0 if all(outcomes) else 1)
