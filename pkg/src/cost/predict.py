"""Consensus p-values, regular and selective decisions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stats
from .data import REJECT
from .model import CostModel, pvalue_matrix

SINGLE = "single"
REJECTED = "reject"
REFINE = "refine"


@dataclass(frozen=True)
class PredictionOutcome:
    """Consensus p-values of one sample and the selective decision drawn from them.

    ``labels`` is the predicted label set: one class for a single
    prediction, the below-threshold classes for refine, ``{REJECT}`` for a
    rejection.  ``argmin`` is the regular (forced-choice) prediction.
    """

    pvalues: tuple[float, ...]
    kind: str
    labels: frozenset
    count: int
    argmin: int


def _combine(model: CostModel, P: np.ndarray) -> np.ndarray:
    return stats.combine_columns(np.swapaxes(P, -1, -2), model.config.combiner, model.r)


def consensus_pvalues(model: CostModel, codes) -> np.ndarray:
    """Per-class consensus p-values, shape (k,) for one sample or (m, k) for many."""
    return _combine(model, pvalue_matrix(model, codes))


def classify(model: CostModel, codes):
    """Class with the smallest consensus p-value (smallest index on ties)."""
    cons = consensus_pvalues(model, codes)
    out = np.argmin(cons, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def decide(pvalues, alpha: float) -> PredictionOutcome:
    """Apply the threshold rules: one class below alpha, none (reject) or several (refine)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    p = np.asarray(pvalues, dtype=float)
    below = np.flatnonzero(p < alpha)
    count = len(below)
    if count == 0:
        kind, labels = REJECTED, frozenset([REJECT])
    elif count == 1:
        kind, labels = SINGLE, frozenset([int(below[0])])
    else:
        kind, labels = REFINE, frozenset(int(c) for c in below)
    return PredictionOutcome(pvalues=tuple(float(v) for v in p), kind=kind, labels=labels,
                             count=count, argmin=int(np.argmin(p)))


def classify_selective(model: CostModel, codes, alpha: float | None = None):
    """Selective prediction(s); ``alpha`` defaults to the model's configured level."""
    alpha = model.config.alpha if alpha is None else alpha
    cons = consensus_pvalues(model, codes)
    if cons.ndim == 1:
        return decide(cons, alpha)
    return [decide(row, alpha) for row in cons]


def bagging_vote(P: np.ndarray, r: int) -> tuple[int, bool]:
    """Plurality vote of per-subspace threshold classifiers on a (B, k) p-value matrix.

    The threshold is the r-th smallest p-value of the rOP-argmin class; a
    subspace votes for every class whose p-value does not exceed it.
    Returns the winning class and whether some other class's r-th order
    statistic fails to exceed the threshold strictly (where equivalence
    with argmin classification is not guaranteed).
    """
    P = np.asarray(P, dtype=float)
    B = P.shape[0]
    order_stats = np.sort(P, axis=0)[r - 1]
    cons = stats.beta_cdf_int(order_stats, r, B)
    best = int(np.argmin(cons))
    tau = order_stats[best]
    tied = bool(np.any(np.delete(order_stats, best) <= tau))
    votes = (P <= tau).sum(axis=0)
    return int(np.argmax(votes)), tied


def bagging_oracle(model: CostModel, codes, r: int | None = None) -> int:
    """Vote-based counterpart of rOP argmin classification, for checking it."""
    r = model.r if r is None else r
    if not 1 <= r <= model.B:
        raise ValueError(f"r={r} outside 1..{model.B}")
    return bagging_vote(pvalue_matrix(model, np.asarray(codes)), r)[0]
