"""Command-line front end.

Subcommands: train, predict, noise, tune, bench, verify.  On success each
command prints exactly one JSON status line to stdout (tables and progress
go to stderr).  Exit codes: 0 success, 1 data or check failure, 2 bad flags.
All commands are deterministic given their --seed; worker parallelism is
capped by the ROBUST_TREES_THREADS environment variable (0 = auto) and never
affects results.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dataeng, forest as forest_mod, noise as noise_mod, tree as tree_mod
from .criteria import CriterionSpec
from .dataeng import DataFormatError, Dataset, ModelConfig
from .verify import SUITES, run_suite

CRITERION_CHOICES = ("gini", "entropy", "misclassification", "mae", "gce", "ne", "twoing")


def _status(payload: dict) -> None:
    print(json.dumps(payload))


def _load_dataset(args) -> Dataset:
    if args.format == "csv":
        return dataeng.load_csv(args.data, label_column=args.label_column,
                                header=not args.no_header)
    return dataeng.load_libsvm(args.data)


def _criterion_from_args(parser: argparse.ArgumentParser, args) -> CriterionSpec:
    kind = args.criterion
    if kind == "gce":
        if args.q is None:
            parser.error("--criterion gce requires --q")
        return CriterionSpec("gce", q=args.q)
    if kind == "ne":
        if args.lam is None:
            parser.error("--criterion ne requires --lambda")
        return CriterionSpec("ne", lam=args.lam)
    if args.q is not None or args.lam is not None:
        parser.error(f"--criterion {kind} takes neither --q nor --lambda")
    return CriterionSpec(kind)


def _model_config_from_args(args) -> ModelConfig:
    return ModelConfig(
        kind="forest" if args.forest else "tree",
        max_depth=args.max_depth,
        min_samples_leaf=args.min_samples_leaf,
        n_trees=args.trees,
        bootstrap=not args.no_bootstrap,
        feature_subsample=args.feature_subsample,
    )


def _add_data_flags(sub, with_label: bool = True):
    sub.add_argument("--data", required=True, help="input dataset path")
    sub.add_argument("--format", required=True, choices=("csv", "libsvm"))
    if with_label:
        sub.add_argument("--label-column", default="label",
                         help="CSV label column name (or index with --no-header)")
        sub.add_argument("--no-header", action="store_true",
                         help="CSV file has no header row")


def _add_model_flags(sub):
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--tree", action="store_true", help="train a single tree (default)")
    group.add_argument("--forest", action="store_true", help="train a random forest")
    sub.add_argument("--trees", type=int, default=100, help="forest size")
    sub.add_argument("--max-depth", type=int, default=None)
    sub.add_argument("--min-samples-leaf", type=int, default=1)
    sub.add_argument("--feature-subsample", type=int, default=None,
                     help="features drawn per split (forest default: ceil(sqrt(d)))")
    sub.add_argument("--no-bootstrap", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-trees",
        description="Noise-robust decision trees and random forests.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model and write it as JSON")
    _add_data_flags(p_train)
    p_train.add_argument("--criterion", required=True, choices=CRITERION_CHOICES)
    p_train.add_argument("--lambda", dest="lam", type=float, default=None,
                         help="NE robustness parameter in [0, 1]")
    p_train.add_argument("--q", type=float, default=None, help="GCE exponent, q >= 0")
    _add_model_flags(p_train)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="output model path")

    p_pred = sub.add_parser("predict", help="apply a trained model to a dataset")
    _add_data_flags(p_pred)
    p_pred.add_argument("--no-labels", action="store_true",
                        help="CSV has feature columns only")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--out", default=None, help="optional predictions CSV")

    p_noise = sub.add_parser("noise", help="corrupt labels / emit a transition matrix")
    _add_data_flags(p_noise)
    p_noise.add_argument("--kind", required=True,
                         choices=("uniform", "binary_cc", "mahalanobis"))
    p_noise.add_argument("--eta", type=float, default=0.0)
    p_noise.add_argument("--rho-pos", type=float, default=0.0)
    p_noise.add_argument("--rho-neg", type=float, default=0.0)
    p_noise.add_argument("--ridge", type=float, default=None)
    p_noise.add_argument("--seed", type=int, default=0)
    p_noise.add_argument("--matrix-out", default=None, help="write the K x K matrix CSV")
    p_noise.add_argument("--out", default=None, help="write the corrupted dataset CSV")

    p_tune = sub.add_parser("tune", help="select the NE lambda on a validation shard")
    _add_data_flags(p_tune)
    p_tune.add_argument("--grid", default="0,0.25,0.5,0.75,1",
                        help="comma-separated lambda values")
    p_tune.add_argument("--validation-fraction", type=float, default=0.2)
    _add_model_flags(p_tune)
    p_tune.add_argument("--seed", type=int, default=0)

    p_bench = sub.add_parser("bench", help="run an experiment config, write result CSVs")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out", required=True, help="results CSV path")
    p_bench.add_argument("--summary", default=None,
                         help="summary CSV path (default: summary.csv next to --out)")
    p_bench.add_argument("--timings", action="store_true",
                         help="record wall times (makes output non-reproducible)")

    p_verify = sub.add_parser("verify", help="run a brute-force oracle suite")
    p_verify.add_argument("--suite", required=True, choices=SUITES)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--inject-fault", action="store_true",
                          help=argparse.SUPPRESS)  # test fixture: force a failure
    return parser


def cmd_train(parser, args) -> int:
    spec = _criterion_from_args(parser, args)
    ds = _load_dataset(args)
    model_cfg = _model_config_from_args(args)
    fitted = dataeng._fit_model(model_cfg, spec, ds.features, ds.labels,
                                ds.n_classes, args.seed)
    if isinstance(fitted, tree_mod.Tree):
        tree_mod.save_tree(fitted, args.out)
        stats = tree_mod.tree_stats(fitted)
    else:
        forest_mod.save_forest(fitted, args.out)
        stats = forest_mod.forest_stats(fitted)
    acc = dataeng.accuracy_score(fitted, ds.features, ds.labels)
    _status({
        "command": "train", "criterion": spec.label(), "model": model_cfg.kind,
        "nodes": stats["node_count"], "leaves": stats["leaf_count"],
        "depth": stats["max_depth"], "train_accuracy": acc, "out": str(args.out),
    })
    return 0


def _load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if "trees" in data:
        return forest_mod.forest_from_dict(data)
    return tree_mod.tree_from_dict(data)


def cmd_predict(parser, args) -> int:
    model = _load_model(args.model)
    if args.no_labels:
        if args.format != "csv":
            parser.error("--no-labels applies to csv input only")
        import csv as _csv

        with open(args.data, "r", encoding="utf-8", newline="") as fh:
            rows = [r for r in _csv.reader(fh) if r]
        if not rows:
            raise DataFormatError(f"{args.data}: empty file")
        body = rows[1:] if args.no_header is False else rows
        X = np.asarray([[float(v) for v in row] for row in body], dtype=np.float64)
        y = None
    else:
        ds = _load_dataset(args)
        X, y = ds.features, ds.labels
    if isinstance(model, tree_mod.Tree):
        classes, dists = tree_mod.predict_batch(model, X)
    else:
        classes, dists = forest_mod.predict_forest_batch(model, X)
    if args.out:
        import csv as _csv

        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(["prediction"] + [f"p{k}" for k in range(dists.shape[1])])
            for c, dist in zip(classes, dists):
                writer.writerow([int(c)] + [repr(float(v)) for v in dist])
    payload = {"command": "predict", "n": int(X.shape[0])}
    if y is not None:
        payload["accuracy"] = float((classes == y).mean())
    if args.out:
        payload["out"] = str(args.out)
    _status(payload)
    return 0


def cmd_noise(parser, args) -> int:
    ds = _load_dataset(args)
    spec = noise_mod.NoiseSpec(
        kind=args.kind, eta=args.eta, rho_pos=args.rho_pos,
        rho_neg=args.rho_neg, ridge=args.ridge,
    )
    matrix = spec.transition(ds.n_classes, features=ds.features, labels=ds.labels)
    noisy = noise_mod.corrupt(ds.labels, matrix, args.seed)
    if args.matrix_out:
        matrix.to_csv(args.matrix_out)
    if args.out:
        import csv as _csv

        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow([f"f{j}" for j in range(ds.n_features)] + ["label"])
            for row, lab in zip(ds.features, noisy):
                writer.writerow([repr(float(v)) for v in row] + [ds.class_names[lab]])
    payload = {
        "command": "noise", "kind": args.kind,
        "flip_fraction": float((noisy != ds.labels).mean()),
        "diagonally_dominant": matrix.diagonally_dominant(),
    }
    if args.matrix_out:
        payload["matrix"] = str(args.matrix_out)
    if args.out:
        payload["out"] = str(args.out)
    _status(payload)
    return 0


def cmd_tune(parser, args) -> int:
    ds = _load_dataset(args)
    try:
        grid = [float(tok) for tok in args.grid.split(",") if tok.strip() != ""]
    except ValueError:
        parser.error(f"--grid must be comma-separated numbers, got {args.grid!r}")
    model_cfg = _model_config_from_args(args)
    best, scores = dataeng.tune_lambda(ds, grid, model_cfg, args.seed,
                                       args.validation_fraction)
    _status({
        "command": "tune", "best_lambda": best,
        "scores": {f"{lam:g}": acc for lam, acc in scores},
    })
    return 0


def cmd_bench(parser, args) -> int:
    config = dataeng.ExperimentConfig.from_json(args.config)
    records = dataeng.evaluate(config)
    dataeng.write_records_csv(records, args.out, timings=args.timings)
    summary_path = args.summary or str(Path(args.out).parent / "summary.csv")
    dataeng.write_summary_csv(dataeng.aggregate(records), summary_path)
    _status({
        "command": "bench", "records": len(records),
        "out": str(args.out), "summary": summary_path,
    })
    return 0


def cmd_verify(parser, args) -> int:
    checks = run_suite(args.suite, seed=args.seed, inject_fault=args.inject_fault)
    failures = [c for c in checks if not c.passed]
    width = max(len(c.name) for c in checks)
    for c in checks:
        marker = "PASS" if c.passed else "FAIL"
        print(f"{marker}  {c.name:<{width}}  {c.detail}", file=sys.stderr)
    _status({
        "command": "verify", "suite": args.suite,
        "checks": len(checks), "failures": len(failures),
    })
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "train": cmd_train,
        "predict": cmd_predict,
        "noise": cmd_noise,
        "tune": cmd_tune,
        "bench": cmd_bench,
        "verify": cmd_verify,
    }
    try:
        return handlers[args.command](parser, args)
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
