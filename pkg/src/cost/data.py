"""Loading, encoding, discretising and splitting tabular data."""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .random import derived_rng

log = logging.getLogger(__name__)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

# sentinel class index for the reject / outlier label c0
REJECT = -1
REJECT_TOKEN = "__REJECT__"
LABEL_SEP = "|"

KMEANS_MAX_ITER = 100


class DataError(ValueError):
    """Raised for unreadable or malformed input data."""


@dataclass(frozen=True)
class FeatureSchema:
    """Feature/label vocabulary shared by training and prediction data.

    ``vocabularies[f]`` lists the raw strings of a categorical feature in
    code order; continuous features keep an empty vocabulary until they
    are discretised.  A missing-value token is stored like any other value
    and so owns a dedicated code in every feature where it occurs.
    """

    names: tuple[str, ...]
    kinds: tuple[str, ...]
    vocabularies: tuple[tuple[str, ...], ...]
    labels: tuple[str, ...]
    label_name: str = "label"
    missing_token: str | None = "?"

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def k(self) -> int:
        return len(self.labels)

    def label_index(self, label: str) -> int:
        if label == REJECT_TOKEN:
            return REJECT
        return self.labels.index(label)

    def label_name_of(self, index: int) -> str:
        return REJECT_TOKEN if index == REJECT else self.labels[index]

    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.vocabularies)

    def continuous_features(self) -> list[int]:
        return [f for f, kind in enumerate(self.kinds) if kind == CONTINUOUS]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Encoded samples.

    ``X`` is an (n, d) float array.  Categorical columns hold integer codes;
    continuous columns hold raw reals, NaN marking a missing cell.  Once
    every column is categorical ``codes`` gives the int matrix.

    ``y`` holds one class index per sample for training data.  Evaluation
    data may instead carry ``truth``, one frozenset of class indices per
    sample, where ``REJECT`` stands for the outlier label.
    """

    X: np.ndarray
    schema: FeatureSchema
    y: np.ndarray | None = None
    truth: tuple[frozenset, ...] | None = None
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.int64)
            y.setflags(write=False)
            object.__setattr__(self, "y", y)
        if self.truth is None and self.y is not None:
            object.__setattr__(self, "truth", tuple(frozenset([int(c)]) for c in self.y))
        if self.ids is None:
            object.__setattr__(self, "ids", np.arange(len(X)))
        if X.ndim != 2 or X.shape[1] != self.schema.d:
            raise DataError(f"expected {self.schema.d} feature columns, got shape {X.shape}")

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def d(self) -> int:
        return self.schema.d

    @property
    def k(self) -> int:
        return self.schema.k

    @property
    def is_categorical(self) -> bool:
        return all(kind == CATEGORICAL for kind in self.schema.kinds)

    @property
    def codes(self) -> np.ndarray:
        if not self.is_categorical:
            raise DataError("dataset still has continuous features; discretise it first")
        return self.X.astype(np.int64)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(
            X=self.X[index],
            schema=self.schema,
            y=None if self.y is None else self.y[index],
            truth=None if self.truth is None else tuple(self.truth[i] for i in index),
            ids=self.ids[index],
        )

    def class_counts(self) -> np.ndarray:
        if self.y is None:
            raise DataError("dataset has no single-label targets")
        return np.bincount(self.y, minlength=self.k)

    def without_class(self, label: int) -> "Dataset":
        """Drop every sample of class ``label`` and the class itself from the schema."""
        keep = np.flatnonzero(self.y != label)
        labels = self.schema.labels[:label] + self.schema.labels[label + 1:]
        remap = np.array([i - (i > label) for i in range(self.k)])
        return Dataset(
            X=self.X[keep],
            schema=replace(self.schema, labels=labels),
            y=remap[self.y[keep]],
            ids=self.ids[keep],
        )

    def decode(self) -> list[list[str]]:
        """Raw string cells for every sample (continuous values as shortest repr)."""
        rows = []
        for x in self.X:
            row = []
            for f, v in enumerate(x):
                if self.schema.kinds[f] == CATEGORICAL:
                    row.append(self.schema.vocabularies[f][int(v)])
                elif math.isnan(v):
                    row.append(self.schema.missing_token or "")
                else:
                    row.append(repr(float(v)))
            rows.append(row)
        return rows


def _parse_float(cell):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: line {reader.line_num}: expected {len(header)} "
                                f"fields, got {len(rec)}")
            rows.append([c.strip() for c in rec])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, rows


def _label_position(header, label_column):
    if label_column is None:
        return len(header) - 1
    if label_column not in header:
        raise DataError(f"label column {label_column!r} not found in header {header}")
    return header.index(label_column)


def load_csv(path, label_column: str | None = None, missing_token: str | None = "?",
             bins: int | None = None, categorical: Sequence[str] | None = (),
             continuous: Sequence[str] | None = ()) -> tuple[Dataset, FeatureSchema]:
    """Read a training CSV and build its schema.

    A feature column is continuous when every non-missing cell parses as a
    finite real and it has more than ``bins`` distinct values (``bins``
    defaults to the number of classes).  ``categorical``/``continuous``
    force the kind of named columns; the name ``*`` applies to all.
    """
    header, rows = read_rows(path)
    li = _label_position(header, label_column)
    feat_idx = [i for i in range(len(header)) if i != li]
    names = tuple(header[i] for i in feat_idx)
    categorical, continuous = categorical or (), continuous or ()
    unknown = (set(categorical) | set(continuous)) - set(names) - {"*"}
    if unknown:
        raise DataError(f"unknown feature column(s): {', '.join(sorted(unknown))}")

    labels: dict[str, int] = {}
    y = []
    for rec in rows:
        lab = rec[li]
        if lab == missing_token or lab == "":
            raise DataError(f"{path}: missing class label")
        y.append(labels.setdefault(lab, len(labels)))
    if bins is None:
        bins = len(labels)

    kinds, vocabs = [], []
    X = np.empty((len(rows), len(feat_idx)))
    for col, i in enumerate(feat_idx):
        cells = [rec[i] for rec in rows]
        present = [c for c in cells if c != missing_token]
        parsed = [_parse_float(c) for c in present]
        numeric = bool(present) and all(v is not None for v in parsed)
        kind = CONTINUOUS if numeric and len(set(parsed)) > bins else CATEGORICAL
        name = names[col]
        if name in categorical or ("*" in categorical and name not in continuous):
            kind = CATEGORICAL
        elif name in continuous or "*" in continuous:
            if not numeric:
                raise DataError(f"column {name!r} is not numeric and cannot be continuous")
            kind = CONTINUOUS
        if kind == CONTINUOUS:
            X[:, col] = [np.nan if c == missing_token else float(c) for c in cells]
            vocabs.append(())
        else:
            vocab: dict[str, int] = {}
            X[:, col] = [vocab.setdefault(c, len(vocab)) for c in cells]
            vocabs.append(tuple(vocab))
        kinds.append(kind)

    schema = FeatureSchema(names=names, kinds=tuple(kinds), vocabularies=tuple(vocabs),
                           labels=tuple(labels), label_name=header[li],
                           missing_token=missing_token)
    return Dataset(X=X, schema=schema, y=np.array(y)), schema


def load_with_schema(path, schema: FeatureSchema, labelled: bool = True,
                     unknown_label: str = "error") -> Dataset:
    """Encode a CSV with an existing schema (prediction / evaluation input).

    Feature columns are matched by name; extra columns other than the label
    are an error.  Unseen categorical values get the reserved code
    ``len(vocabulary)``.  Label cells may hold several labels joined by
    ``|``; ``__REJECT__`` marks the outlier label.  With
    ``unknown_label="reject"`` labels outside the schema are read as the
    outlier label instead of failing.
    """
    header, rows = read_rows(path)
    pos = {h: i for i, h in enumerate(header)}
    missing = [n for n in schema.names if n not in pos]
    if missing:
        raise DataError(f"{path}: missing feature column(s): {', '.join(missing)}")
    allowed = set(schema.names) | {schema.label_name}
    extra = [h for h in header if h not in allowed]
    if extra:
        raise DataError(f"{path}: unknown feature column {extra[0]!r}")
    has_label = labelled and schema.label_name in pos

    X = np.empty((len(rows), schema.d))
    for f, name in enumerate(schema.names):
        cells = [rec[pos[name]] for rec in rows]
        if schema.kinds[f] == CONTINUOUS:
            vals = []
            for c in cells:
                if c == schema.missing_token:
                    vals.append(np.nan)
                    continue
                v = _parse_float(c)
                if v is None:
                    raise DataError(f"{path}: non-numeric value {c!r} in column {name!r}")
                vals.append(v)
            X[:, f] = vals
        else:
            vocab = {v: i for i, v in enumerate(schema.vocabularies[f])}
            unseen = len(vocab)
            X[:, f] = [vocab.get(c, unseen) for c in cells]

    truth = None
    if has_label:
        truth = []
        for rec in rows:
            idx = set()
            for lab in rec[pos[schema.label_name]].split(LABEL_SEP):
                if lab == REJECT_TOKEN:
                    idx.add(REJECT)
                elif lab in schema.labels:
                    idx.add(schema.labels.index(lab))
                elif unknown_label == "reject":
                    idx.add(REJECT)
                else:
                    raise DataError(f"{path}: label {lab!r} not in training labels")
            truth.append(frozenset(idx))
        truth = tuple(truth)
    y = None
    if truth is not None and all(len(t) == 1 and REJECT not in t for t in truth):
        y = np.array([next(iter(t)) for t in truth])
    return Dataset(X=X, schema=schema, y=y, truth=truth)


@dataclass(frozen=True)
class Discretizer:
    """Cluster centres per continuous feature.

    ``centers[f]`` is the sorted tuple of centres for feature ``f``.  A
    missing cell maps to the extra code ``len(centers[f])``.
    """

    centers: dict[int, tuple[float, ...]] = field(default_factory=dict)

    @property
    def is_identity(self) -> bool:
        return not self.centers

    def bins(self, feature: int) -> int:
        return len(self.centers[feature])

    def assign(self, feature: int, values) -> np.ndarray:
        c = np.asarray(self.centers[feature])
        v = np.asarray(values, dtype=float)
        out = np.abs(v[:, None] - c[None, :]).argmin(axis=1)  # argmin keeps the lower index on ties
        out[np.isnan(v)] = len(c)
        return out


def kmeans_1d(values, bins: int) -> tuple[float, ...]:
    """Lloyd's k-means on a line, started at quantiles of the distinct values.

    Stops when assignments no longer change or after 100 iterations.  An
    empty cluster is re-seeded at the point farthest from its own centre.
    """
    x = np.sort(np.asarray(values, dtype=float))
    distinct = np.unique(x)
    bins = max(1, min(bins, len(distinct)))
    if bins == 1:
        return (float(x.mean()),)
    q = np.quantile(distinct, (np.arange(bins) + 0.5) / bins, method="nearest")
    centers = np.unique(q)
    if len(centers) < bins:
        centers = distinct[np.linspace(0, len(distinct) - 1, bins).round().astype(int)]
    assign = None
    for _ in range(KMEANS_MAX_ITER):
        dist = np.abs(x[:, None] - centers[None, :])
        new = dist.argmin(axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        counts = np.bincount(assign, minlength=bins)
        for j in range(bins):
            if counts[j]:
                centers[j] = x[assign == j].mean()
            else:
                far = dist[np.arange(len(x)), assign].argmax()
                centers[j] = x[far]
                assign[far] = j
        centers = np.sort(centers)
    centers = np.unique(centers)
    return tuple(float(c) for c in centers)


def fit_discretizer(dataset: Dataset, bins: int | None = None) -> Discretizer:
    """Fit 1-D k-means per continuous feature; ``bins`` defaults to the class count."""
    bins = dataset.k if bins is None else bins
    if bins < 1:
        raise ValueError("bins must be >= 1")
    centers = {}
    for f in dataset.schema.continuous_features():
        col = dataset.X[:, f]
        col = col[~np.isnan(col)]
        centers[f] = kmeans_1d(col, bins) if len(col) else (0.0,)
    return Discretizer(centers)


def apply_discretizer(disc: Discretizer, dataset: Dataset) -> Dataset:
    """Replace continuous columns by bin indices; the result is fully categorical."""
    cont = dataset.schema.continuous_features()
    if not cont:
        return dataset
    X = np.array(dataset.X)
    kinds = list(dataset.schema.kinds)
    vocabs = list(dataset.schema.vocabularies)
    for f in cont:
        X[:, f] = disc.assign(f, X[:, f])
        kinds[f] = CATEGORICAL
        vocabs[f] = tuple(f"bin{j}" for j in range(disc.bins(f))) + (
            (dataset.schema.missing_token or "",))
    schema = replace(dataset.schema, kinds=tuple(kinds), vocabularies=tuple(vocabs))
    return Dataset(X=X, schema=schema, y=dataset.y, truth=dataset.truth, ids=dataset.ids)


def split_train_validation(dataset: Dataset, val_fraction: float = 0.2,
                           seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified random split into (train, validation).

    Each class contributes ``round(val_fraction * count)`` samples to the
    validation part, at least one and never all of them.  A singleton class
    stays wholly in training.
    """
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    rng = derived_rng(seed, "split")
    train_idx, val_idx = [], []
    for c in range(dataset.k):
        members = np.flatnonzero(dataset.y == c)
        if len(members) == 0:
            continue
        if len(members) == 1:
            warnings.warn(f"class {dataset.schema.labels[c]!r} has a single sample; "
                          "it stays in training", stacklevel=2)
            train_idx.extend(members)
            continue
        members = rng.permutation(members)
        n_val = min(max(1, int(round(val_fraction * len(members)))), len(members) - 1)
        val_idx.extend(members[:n_val])
        train_idx.extend(members[n_val:])
    return dataset.subset(np.sort(train_idx)), dataset.subset(np.sort(val_idx))


def stratified_kfold(dataset: Dataset, folds: int = 5, repeats: int = 1,
                     seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Index pairs (train, test) for ``repeats`` rounds of stratified k-fold.

    Within a repeat each class is shuffled and dealt round-robin to the
    folds, starting where the previous class stopped so fold sizes stay
    balanced.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    y = dataset.y
    pairs = []
    all_idx = np.arange(dataset.n)
    for rep in range(repeats):
        rng = derived_rng(seed, "folds", rep)
        fold_of = np.empty(dataset.n, dtype=np.int64)
        start = 0
        for c in range(dataset.k):
            members = rng.permutation(np.flatnonzero(y == c))
            fold_of[members] = (start + np.arange(len(members))) % folds
            start = (start + len(members)) % folds
        for f in range(folds):
            test = all_idx[fold_of == f]
            train = all_idx[fold_of != f]
            pairs.append((train, test))
    return pairs
