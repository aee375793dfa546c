"""Command-line front end: ``structhash {train,encode,eval,compare,selftest}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields

import numpy as np

from . import retrieval
from .data import DataFormatError, load_dataset
from .hashing import HashModel
from .lp import SolverError
from .measures import MEASURES
from .pipeline import TrainConfig, evaluate_model, fit, query_ground_truth
from .solver import default_threads

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("structhash")


class CliError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # usage errors share the config exit code instead of argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p):
    p.add_argument("--format", choices=("csv", "raw"), default="csv", help="dataset file format")
    p.add_argument("--label-column", action="store_true", help="last CSV field is a class label")
    p.add_argument("--threads", type=int, default=None, help="inference fan-out (default $STRUCTHASH_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_eval_inputs(p):
    p.add_argument("--model", required=True)
    p.add_argument("--queries", required=True, help="query dataset file")
    p.add_argument("--database", required=True, help="database dataset file")
    p.add_argument("--query-labels")
    p.add_argument("--database-labels")
    p.add_argument("--percentile", type=float, default=None,
                   help="ground truth = top-percentile Euclidean neighbours (when no labels)")
    p.add_argument("--k", type=int, action="append", dest="ks", help="cutoff K, repeatable (default 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", dest="json_out", help="JSON report path")
    p.add_argument("--csv", dest="csv_out", help="CSV report path (one row per K)")
    p.add_argument("--pr-csv", dest="pr_out", help="precision/recall curve CSV path")
    _add_common(p)


def build_parser() -> argparse.ArgumentParser:
    d = TrainConfig()
    parser = _Parser(prog="structhash", description="Structured hashing for ranking-aware retrieval.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="learn hash functions and bit weights")
    t.add_argument("--data", required=True, help="training dataset file")
    t.add_argument("--labels", help="labels file, one integer per line")
    t.add_argument("--percentile", type=float, default=None,
                   help="top-percentile Euclidean ground truth (default when no labels: 2)")
    t.add_argument("--model", required=True, help="output model path (JSON)")
    t.add_argument("--trace", help="output trace path (tab-separated)")
    t.add_argument("--loss", choices=MEASURES, default=d.loss)
    t.add_argument("--k", type=int, default=d.k)
    t.add_argument("--ndcg-normalizer", choices=("ideal", "literal"), default=d.ndcg_normalizer)
    t.add_argument("--bits", type=int, default=d.bits)
    t.add_argument("--C", type=float, default=d.C)
    t.add_argument("--eps-cp", type=float, default=d.eps_cp)
    t.add_argument("--max-cp-iters", type=int, default=d.max_cp_iters)
    t.add_argument("--relevant", type=int, default=d.relevant)
    t.add_argument("--irrelevant", type=int, default=d.irrelevant)
    t.add_argument("--no-standardize", dest="standardize", action="store_false")
    t.add_argument("--kernel", action="store_true", help="RBF features against sampled anchors")
    t.add_argument("--anchors", type=int, default=d.anchors)
    t.add_argument("--bandwidth", type=float, default=d.bandwidth)
    t.add_argument("--alpha", type=float, default=d.alpha)
    t.add_argument("--smooth-eps", type=float, default=d.smooth_eps)
    t.add_argument("--random-planes", type=int, default=d.random_planes)
    t.add_argument("--optimizer", choices=("quasi-newton", "gradient-ascent"), default=d.optimizer)
    t.add_argument("--max-opt-iters", type=int, default=d.max_opt_iters)
    t.add_argument("--balanced-bits", action="store_true")
    t.add_argument("--max-queries", type=int, default=d.max_queries)
    t.add_argument("--seed", type=int, default=d.seed)
    _add_common(t)

    e = sub.add_parser("encode", help="write packed binary codes for a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True, help="output code file")
    _add_common(e)

    ev = sub.add_parser("eval", help="retrieval metrics of a model")
    _add_eval_inputs(ev)

    c = sub.add_parser("compare", help="retrieval metrics of a model against LSH at equal bits")
    _add_eval_inputs(c)
    c.add_argument("--lsh-seed", type=int, default=None, help="LSH seed (default: --seed)")

    s = sub.add_parser("selftest", help="run the built-in consistency suites")
    s.add_argument("-v", "--verbose", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _threads(args) -> int:
    if args.threads is None:
        return default_threads()
    if args.threads < 1:
        raise CliError("--threads must be >= 1")
    return args.threads


def _load(path, args, labels_path=None):
    try:
        return load_dataset(path, args.format, label_column=args.label_column, labels_path=labels_path)
    except (DataFormatError, OSError) as exc:
        raise CliError(f"cannot load {path}: {exc}", EXIT_DATA) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _load_model(path) -> HashModel:
    try:
        return HashModel.load(path)
    except OSError as exc:
        raise CliError(f"cannot read model {path}: {exc}", EXIT_DATA) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: not a valid model file ({exc})", EXIT_DATA) from None


def _train_config(args) -> TrainConfig:
    names = {f.name for f in fields(TrainConfig)}
    values = {k: v for k, v in vars(args).items() if k in names}
    values["balanced_bits"] = args.balanced_bits
    values["threads"] = _threads(args)
    cfg = TrainConfig(**values)
    for name in ("bits", "k", "relevant", "irrelevant", "max_cp_iters", "anchors", "max_opt_iters"):
        if getattr(cfg, name) < 1:
            raise CliError(f"--{name.replace('_', '-')} must be >= 1")
    if cfg.C <= 0 or cfg.eps_cp <= 0:
        raise CliError("--C and --eps-cp must be positive")
    if cfg.percentile is not None and not 0 < cfg.percentile < 100:
        raise CliError("--percentile must lie in (0, 100)")
    try:
        cfg.spec()
        cfg.hash_learner()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return cfg


def write_trace(path, cfg: TrainConfig, trace) -> None:
    with open(path, "w") as fh:
        for key, value in asdict(cfg).items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"# converged={str(trace.converged).lower()}\n")
        if trace.failed:
            fh.write(f"# failed={trace.failed}\n")
        fh.write("bit\titeration\tviolation\txi\tobjective\tworking_set\tbit_converged\n")
        for rec in trace.bits:
            flag = "yes" if rec["converged"] else "NO"
            for it, viol, xi, obj, size in rec["cp_trace"]:
                fh.write(f"{rec['bit']}\t{it}\t{viol!r}\t{xi!r}\t{obj!r}\t{size}\t{flag}\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args) -> int:
    cfg = _train_config(args)
    data, labels = _load(args.data, args, args.labels)
    if labels is None and cfg.percentile is None:
        log.info("no labels given: using top-2-percentile Euclidean ground truth")
    if labels is not None and cfg.percentile is not None:
        raise CliError("give either labels or --percentile, not both")
    try:
        model, trace = fit(data, labels, cfg)
    except SolverError as exc:
        raise CliError(f"numerical failure: {exc}", EXIT_NUMERICAL) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    if args.trace:
        write_trace(args.trace, cfg, trace)
    if trace.failed and model.bits == 0:
        raise CliError(f"numerical failure before the first bit: {trace.failed}", EXIT_NUMERICAL)
    model.save(args.model)
    if trace.failed:
        print(f"solver failed after {model.bits} bits; partial model written to {args.model}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not trace.converged:
        print("warning: cutting plane hit its iteration cap on some bits (see trace)", file=sys.stderr)
    print(f"trained {model.bits} bits, {int(np.count_nonzero(model.w))} with nonzero weight -> {args.model}")
    return EXIT_OK


def cmd_encode(args) -> int:
    model = _load_model(args.model)
    data, _ = _load(args.data, args)
    try:
        codes = retrieval.encode(model, data)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None
    codes.save(args.out)
    print(f"encoded {codes.rows} rows x {codes.bits} bits -> {args.out}")
    return EXIT_OK


def _ground_truth(args, qv, dbv, q_labels, db_labels):
    if q_labels is not None and db_labels is not None:
        return query_ground_truth(qv, dbv, q_labels, db_labels)
    if q_labels is not None or db_labels is not None:
        raise CliError("labels given for only one of queries/database", EXIT_DATA)
    if args.percentile is None:
        raise CliError("no ground truth: give labels for queries and database, or --percentile", EXIT_DATA)
    if not 0 < args.percentile < 100:
        raise CliError("--percentile must lie in (0, 100)")
    return query_ground_truth(qv, dbv, percentile=args.percentile)


def _eval_inputs(args):
    ks = args.ks or [100]
    if min(ks) < 1:
        raise CliError("--k must be >= 1")
    model = _load_model(args.model)
    queries, q_labels = _load(args.queries, args, args.query_labels)
    database, db_labels = _load(args.database, args, args.database_labels)
    gts = _ground_truth(args, queries.values, database.values, q_labels, db_labels)
    if max(ks) > database.rows:
        raise CliError(f"--k {max(ks)} exceeds the database size {database.rows}")
    return model, queries.values, database.values, gts, ks


def _evaluate(model, qv, dbv, gts, ks, config):
    try:
        return evaluate_model(model, qv, dbv, gts, ks, config)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _suffixed(path, suffix):
    stem, dot, ext = path.rpartition(".")
    return f"{stem}.{suffix}.{ext}" if dot else f"{path}.{suffix}"


def _write_reports(report, args):
    if args.json_out:
        report.write_json(args.json_out)
    if args.csv_out:
        report.write_csv(args.csv_out)
    if args.pr_out:
        report.write_pr_csv(args.pr_out)


def _summary(label, report):
    parts = [f"{k}={v:.4f}" for k, v in report.means.items()]
    return f"{label:<10} " + "  ".join(parts)


def cmd_eval(args) -> int:
    model, qv, dbv, gts, ks = _eval_inputs(args)
    report = _evaluate(model, qv, dbv, gts, ks, {"method": "structhash", "seed": args.seed})
    _write_reports(report, args)
    print(_summary("structhash", report))
    if report.excluded:
        print(f"{len(report.excluded)} queries without relevant items were excluded", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    model, qv, dbv, gts, ks = _eval_inputs(args)
    lsh_seed = args.seed if args.lsh_seed is None else args.lsh_seed
    dims = model.kernel.dims if model.kernel is not None else model.input_dims
    lsh = retrieval.lsh_baseline(dims, model.bits, lsh_seed, model.standardization, model.kernel)
    ours = _evaluate(model, qv, dbv, gts, ks, {"method": "structhash", "seed": args.seed})
    base = _evaluate(lsh, qv, dbv, gts, ks, {"method": "lsh", "seed": lsh_seed})
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump({"structhash": ours.to_dict(), "lsh": base.to_dict()}, fh, indent=1)
            fh.write("\n")
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write("method,bits,seed,k,ndcg,precision,map,auc\n")
            for name, rep in (("structhash", ours), ("lsh", base)):
                for k in ks:
                    m = rep.means
                    fh.write(f"{name},{model.bits},{rep.config['seed']},{k},{m[f'ndcg@{k}']!r},"
                             f"{m[f'p@{k}']!r},{m['map']!r},{m['auc']!r}\n")
    if args.pr_out:
        ours.write_pr_csv(_suffixed(args.pr_out, "structhash"))
        base.write_pr_csv(_suffixed(args.pr_out, "lsh"))
    print(_summary("structhash", ours))
    print(_summary("lsh", base))
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("FAILED: " + ", ".join(failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {"train": cmd_train, "encode": cmd_encode, "eval": cmd_eval, "compare": cmd_compare,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"structhash {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except SolverError as exc:
        print(f"structhash {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
