"""Scoring of regular and selective predictions, and repeated cross-validation."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import REJECT, Dataset, stratified_kfold
from .model import TrainConfig, resolve_threads, train
from .predict import REFINE, REJECTED, SINGLE, PredictionOutcome, classify_selective

log = logging.getLogger(__name__)

METRICS = ("accuracy", "jacacc", "single_rate", "refine_rate", "reject_rate", "outlier_rate")


def jaccard(pred, truth) -> float:
    """|pred & truth| / |pred | truth|; the reject label counts as an ordinary element."""
    pred, truth = frozenset(pred), frozenset(truth)
    if not pred or not truth:
        raise ValueError("label sets must be non-empty")
    return len(pred & truth) / len(pred | truth)


@dataclass
class EvalReport:
    """Summary of one test set, or the mean over many folds.

    ``outlier_rate`` is the share of outlier-truth samples that were
    rejected (NaN when the test set has none).  For aggregated reports
    ``sd`` holds the per-metric standard deviation and ``folds`` the
    per-fold reports.
    """

    n: int
    accuracy: float
    jacacc: float
    single_rate: float
    refine_rate: float
    reject_rate: float
    outlier_rate: float = float("nan")
    confusion: np.ndarray | None = None
    seconds: float = 0.0
    sd: dict = field(default_factory=dict)
    folds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def metric(self, name: str) -> float:
        return getattr(self, name)


def score(predictions: list[PredictionOutcome], truths, k: int | None = None) -> EvalReport:
    """Accuracy of the argmin class, JacAcc and decision rates over a test set.

    ``truths`` are label sets.  A sample counts as argmin-correct when its
    argmin class is one of its true labels.  The confusion matrix (truth
    rows, argmin columns) covers single-label, in-vocabulary truths only.
    """
    if len(predictions) != len(truths):
        raise ValueError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not predictions:
        raise ValueError("nothing to score")
    truths = [frozenset(t) for t in truths]
    k = k or len(predictions[0].pvalues)
    n = len(predictions)
    correct = sum(p.argmin in t for p, t in zip(predictions, truths))
    jac = sum(jaccard(p.labels, t) for p, t in zip(predictions, truths))
    kinds = [p.kind for p in predictions]
    outliers = [p for p, t in zip(predictions, truths) if REJECT in t]
    confusion = np.zeros((k, k), dtype=np.int64)
    for p, t in zip(predictions, truths):
        if len(t) == 1 and REJECT not in t:
            confusion[next(iter(t)), p.argmin] += 1
    return EvalReport(
        n=n,
        accuracy=correct / n,
        jacacc=jac / n,
        single_rate=kinds.count(SINGLE) / n,
        refine_rate=kinds.count(REFINE) / n,
        reject_rate=kinds.count(REJECTED) / n,
        outlier_rate=(sum(p.kind == REJECTED for p in outliers) / len(outliers)
                      if outliers else float("nan")),
        confusion=confusion,
    )


def _fold_task(dataset, cfg, alpha, holdout, rep, fold, train_idx, test_idx):
    seed = int(np.random.SeedSequence([cfg.seed, rep, fold]).generate_state(1)[0])
    fold_cfg = replace(cfg, seed=seed)
    tr = dataset.subset(train_idx)
    te = dataset.subset(test_idx)
    truths = list(te.truth)
    if holdout is not None:
        tr = tr.without_class(holdout)
        remap = {c: c - (c > holdout) for c in range(dataset.k) if c != holdout}
        remap[holdout] = REJECT
        truths = [frozenset(remap[c] for c in t) for t in truths]
    try:
        model = train(tr, None, fold_cfg, threads=1)
        preds = classify_selective(model, model.encode(te), alpha)
    except Exception as exc:
        raise RuntimeError(f"fold (repeat {rep}, fold {fold}) failed: {exc}") from exc
    report = score(preds, truths, k=model.k)
    report.config = {"repeat": rep, "fold": fold, "r": model.r, "B": model.B}
    return report


def cross_validate(dataset: Dataset, cfg: TrainConfig = TrainConfig(), folds: int = 5,
                   repeats: int = 10, alpha: float | None = None, holdout: int | None = None,
                   threads: int | None = 1) -> EvalReport:
    """Repeated stratified k-fold evaluation.

    Every fold fits its own discretiser and model on the training part
    only.  With ``holdout`` set, that class is removed from every training
    part and its test samples are scored with the outlier label.  Folds
    may run on several threads; the aggregate depends only on the seed.
    """
    alpha = cfg.alpha if alpha is None else alpha
    start = time.perf_counter()
    pairs = stratified_kfold(dataset, folds, repeats, cfg.seed)
    tasks = [(dataset, cfg, alpha, holdout, i // folds, i % folds, tr, te)
             for i, (tr, te) in enumerate(pairs)]
    workers = resolve_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(lambda t: _fold_task(*t), tasks))
    else:
        reports = [_fold_task(*t) for t in tasks]
    agg = aggregate(reports)
    agg.seconds = time.perf_counter() - start
    agg.config = {"folds": folds, "repeats": repeats, "alpha": alpha, "holdout": holdout,
                  **{k: v for k, v in vars(cfg).items()}}
    return agg


def aggregate(reports: list[EvalReport]) -> EvalReport:
    means, sds = {}, {}
    for name in METRICS:
        vals = np.array([r.metric(name) for r in reports], dtype=float)
        vals = vals[~np.isnan(vals)]
        means[name] = float(vals.mean()) if len(vals) else float("nan")
        sds[name] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    confusion = sum(r.confusion for r in reports)
    return EvalReport(n=sum(r.n for r in reports), confusion=confusion, sd=sds,
                      folds=list(reports), **means)


def _fmt(v: float) -> str:
    return "nan" if v != v else f"{v:.6f}"


def format_keyvalue(report: EvalReport, timing: bool = False) -> str:
    """Machine-readable ``key=value`` block; per-fold rows follow the totals."""
    lines = [f"n={report.n}"]
    for name in METRICS:
        lines.append(f"{name}={_fmt(report.metric(name))}")
        if name in report.sd:
            lines.append(f"{name}_sd={_fmt(report.sd[name])}")
    for key, value in report.config.items():
        lines.append(f"config.{key}={value}")
    if timing:
        lines.append(f"seconds={report.seconds:.3f}")
    for f in report.folds:
        cells = " ".join(f"{name}={_fmt(f.metric(name))}" for name in METRICS)
        lines.append(f"fold.{f.config['repeat']}.{f.config['fold']}="
                     f"r={f.config['r']} B={f.config['B']} n={f.n} {cells}")
    return "\n".join(lines) + "\n"


def format_table(report: EvalReport, labels=None, timing: bool = True) -> str:
    """Human-readable summary."""
    rows = [("metric", "mean", "sd")]
    for name in METRICS:
        rows.append((name, _fmt(report.metric(name)), _fmt(report.sd.get(name, 0.0))))
    width = max(len(r[0]) for r in rows)
    out = [f"{a:<{width}}  {b:>9}  {c:>9}" for a, b, c in rows]
    if report.folds:
        out.append(f"folds: {len(report.folds)}   test samples: {report.n}")
    if timing:
        out.append(f"seconds: {report.seconds:.2f}")
    if report.confusion is not None and labels:
        out.append("confusion (rows = truth, cols = argmin prediction):")
        w = max(len(str(l)) for l in labels)
        out.append(" " * (w + 2) + " ".join(f"{str(l):>{max(w, 6)}}" for l in labels))
        for lab, row in zip(labels, report.confusion):
            out.append(f"{str(lab):<{w}}  " + " ".join(f"{v:>{max(w, 6)}}" for v in row))
    return "\n".join(out) + "\n"
