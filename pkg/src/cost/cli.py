"""Command-line front end: ``cost train | predict | evaluate | cv``.

Exit status is 0 on success, 1 for data or model errors and 2 for usage
errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
import warnings

from . import __version__
from .data import DataError, load_csv, load_with_schema
from .evaluate import cross_validate, format_keyvalue, format_table, score
from .model import ModelFormatError, TrainConfig, load_model, save_model, train
from .predict import SINGLE, PredictionOutcome, classify_selective, consensus_pvalues, decide
from .stats import COMBINERS

log = logging.getLogger("cost")


class UsageError(Exception):
    pass


def _names(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--label-column", default=None,
                   help="name of the label column (default: last column)")
    p.add_argument("--missing-token", default="?", help="cell value meaning 'missing'")
    p.add_argument("--categorical", type=_names, default=[], metavar="COLS",
                   help="comma-separated columns to force categorical ('*' for all)")
    p.add_argument("--continuous", type=_names, default=[], metavar="COLS",
                   help="comma-separated columns to force continuous ('*' for all)")


def _add_train_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--b1", type=int, default=100, help="number of selected subspaces")
    p.add_argument("--b2", type=int, default=10, help="candidates per selection round")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--combiner", choices=COMBINERS, default="rop")
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--bins", type=int, default=None,
                   help="k-means bins per continuous feature (default: number of classes)")
    p.add_argument("--no-single-features", dest="single_features", action="store_false",
                   help="do not append the one-feature subspaces")


def _add_common(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $COST_THREADS or all cores)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cost", description="Subspace ensemble classifier "
                                 "with exact tests and selective prediction.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and save it")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_common(p)
    p.add_argument("--validation", default=None,
                   help="separate validation CSV for choosing r (default: carve from --data)")
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("predict", help="write consensus p-values and decisions")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-", help="output CSV (default: stdout)")
    p.add_argument("--alpha", type=float, default=None,
                   help="significance level (default: the model's)")
    p.add_argument("--mode", choices=("selective", "argmin"), default="selective")
    _add_common(p)

    p = sub.add_parser("evaluate", help="score a model on a labelled test file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="labelled CSV; labels may be joined by '|', __REJECT__ marks outliers")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--report", default=None, help="also write the key=value report here")
    p.add_argument("--timing", action="store_true", help="include seconds in the report")
    _add_common(p)

    p = sub.add_parser("cv", help="repeated stratified k-fold cross-validation")
    _add_data_flags(p)
    _add_train_flags(p)
    _add_common(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--holdout-class", default=None, metavar="LABEL",
                   help="label name or 0-based class index to leave out of training; "
                   "its test rows count as outliers")
    p.add_argument("--report", default=None, help="also write the key=value report here")
    p.add_argument("--timing", action="store_true", help="include seconds in the report")
    return ap


def _config(args) -> TrainConfig:
    try:
        return TrainConfig(b1=args.b1, b2=args.b2, alpha=args.alpha, combiner=args.combiner,
                           val_fraction=args.val_fraction, seed=args.seed,
                           include_single_features=args.single_features, bins=args.bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_alpha(alpha):
    if alpha is not None and not 0 < alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")


def _check_threads(args):
    if args.threads is not None and args.threads < 1:
        raise UsageError("--threads must be >= 1")


def _load_training(args):
    return load_csv(args.data, label_column=args.label_column, missing_token=args.missing_token,
                    bins=args.bins, categorical=args.categorical, continuous=args.continuous)


def cmd_train(args) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    ds, schema = _load_training(args)
    val = None
    if args.validation:
        val = load_with_schema(args.validation, schema)
        if val.y is None:
            raise DataError(f"{args.validation}: validation rows need a single known label")
    model = train(ds, val, cfg, threads=args.threads)
    save_model(model, args.out)
    print(f"B={model.B} r={model.r} l_max={model.metadata['l_max']} "
          f"n_train={model.n} seconds={time.perf_counter() - start:.2f}")
    return 0


def _prediction_rows(model, outcomes: list[PredictionOutcome], mode: str):
    labels = model.schema.labels
    header = ["row"] + [f"p_{lab}" for lab in labels] + ["decision", "labels"]
    yield header
    for i, o in enumerate(outcomes):
        if mode == "argmin":
            kind, chosen = SINGLE, [o.argmin]
        else:
            kind, chosen = o.kind, sorted(o.labels)
        names = "|".join(model.schema.label_name_of(c) for c in chosen)
        yield [i + 1, *(repr(p) for p in o.pvalues), kind, names]


def cmd_predict(args) -> int:
    _check_alpha(args.alpha)
    model = load_model(args.model)
    ds = load_with_schema(args.data, model.schema, labelled=False)
    alpha = model.config.alpha if args.alpha is None else args.alpha
    outcomes = [decide(p, alpha) for p in consensus_pvalues(model, model.encode(ds))]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(_prediction_rows(model, outcomes, args.mode))
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    return 0


def _emit_report(report, args, labels):
    sys.stdout.write(format_table(report, labels))
    text = format_keyvalue(report, timing=args.timing)
    sys.stdout.write(text)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_evaluate(args) -> int:
    _check_alpha(args.alpha)
    start = time.perf_counter()
    model = load_model(args.model)
    ds = load_with_schema(args.data, model.schema, labelled=True, unknown_label="reject")
    if ds.truth is None:
        raise DataError(f"{args.data}: no label column {model.schema.label_name!r}")
    outcomes = classify_selective(model, model.encode(ds), args.alpha)
    if not isinstance(outcomes, list):
        outcomes = [outcomes]
    report = score(outcomes, ds.truth, k=model.k)
    report.seconds = time.perf_counter() - start
    report.config = {"alpha": model.config.alpha if args.alpha is None else args.alpha,
                     "r": model.r, "B": model.B, "combiner": model.config.combiner}
    _emit_report(report, args, model.schema.labels)
    return 0


def _class_index(value: str, labels) -> int:
    """Label name, or failing that a 0-based class index."""
    if value in labels:
        return labels.index(value)
    if value.isdigit() and int(value) < len(labels):
        return int(value)
    raise DataError(f"--holdout-class {value!r} is neither a label nor a class index "
                    f"(labels: {', '.join(labels)})")


def cmd_cv(args) -> int:
    cfg = _config(args)
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    ds, schema = _load_training(args)
    holdout = None
    if args.holdout_class is not None:
        holdout = _class_index(args.holdout_class, schema.labels)
        if schema.k < 3:
            raise DataError("--holdout-class needs at least three classes")
    report = cross_validate(ds, cfg, folds=args.folds, repeats=args.repeats, holdout=holdout,
                            threads=args.threads)
    labels = [l for i, l in enumerate(schema.labels) if i != holdout]
    _emit_report(report, args, labels)
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "cv": cmd_cv}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s: %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore")
            _check_threads(args)
            return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cost {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ModelFormatError, OSError, ValueError, RuntimeError) as exc:
        print(f"cost {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
