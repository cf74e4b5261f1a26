"""Training, p-value computation and persistence of the subspace ensemble."""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import stats
from .data import (Dataset, Discretizer, FeatureSchema, apply_discretizer,
                   fit_discretizer, split_train_validation)
from .random import derived_rng
from .subspace import (FrequencyTable, build_frequency_table, max_subspace_size, project_keys,
                       sample_candidate, select_best, table_from_values)

log = logging.getLogger(__name__)

FORMAT_NAME = "cost-model"
FORMAT_VERSION = 1
MIN_VALIDATION = 5
DEFAULT_R_FRACTION = 0.3


class ModelFormatError(ValueError):
    """A model file could not be read back."""


@dataclass(frozen=True)
class TrainConfig:
    b1: int = 100
    b2: int = 10
    alpha: float = 0.05
    combiner: str = "rop"
    val_fraction: float = 0.2
    seed: int = 0
    include_single_features: bool = True
    bins: int | None = None  # None -> number of classes

    def __post_init__(self):
        if self.b1 < 0:
            raise ValueError("b1 must be >= 0")
        if self.b2 < 1:
            raise ValueError("b2 must be >= 1")
        if self.b1 == 0 and not self.include_single_features:
            raise ValueError("empty ensemble: b1 = 0 without single-feature subspaces")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.combiner not in stats.COMBINERS:
            raise ValueError(f"combiner must be one of {stats.COMBINERS}")
        if self.bins is not None and self.bins < 1:
            raise ValueError("bins must be >= 1")


@dataclass(frozen=True, eq=True)
class CostModel:
    """A trained ensemble.  Immutable; p-value lookups are cached lazily."""

    schema: FeatureSchema
    discretizer: Discretizer
    tables: tuple[FrequencyTable, ...]
    class_totals: tuple[int, ...]
    r: int
    config: TrainConfig
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION
    _pcache: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        B = len(self.tables)
        if B < 1:
            raise ValueError("model needs at least one subspace")
        if not 1 <= self.r <= B:
            raise ValueError(f"r={self.r} outside 1..{B}")
        n = sum(self.class_totals)
        for t in self.tables:
            if t.n != n:
                raise ValueError("frequency table sample count disagrees with the model")

    @property
    def B(self) -> int:
        return len(self.tables)

    @property
    def k(self) -> int:
        return len(self.class_totals)

    @property
    def n(self) -> int:
        return sum(self.class_totals)

    @property
    def subspaces(self) -> list[tuple[int, ...]]:
        return [t.subspace for t in self.tables]

    def tuple_pvalues(self) -> list[np.ndarray]:
        """Per subspace, the (u, k) Fisher p-values of every seen tuple."""
        if self._pcache is None:
            object.__setattr__(self, "_pcache", [tuple_pvalue_table(t) for t in self.tables])
        return self._pcache

    def encode(self, dataset: Dataset) -> np.ndarray:
        """Integer codes of ``dataset`` under this model's schema and bins."""
        if not dataset.is_categorical:
            dataset = apply_discretizer(self.discretizer, dataset)
        return dataset.codes


def tuple_pvalue_table(table: FrequencyTable) -> np.ndarray:
    totals = table.totals[:, None]
    col = np.asarray(table.class_totals)[None, :]
    return stats.fisher_upper_tail_counts(table.counts, totals, col, table.n)


def pvalue_matrix(model: CostModel, codes: np.ndarray) -> np.ndarray:
    """Subspace-by-class p-values for each encoded sample.

    ``codes`` is (m, d) or a single (d,) sample; the result is (m, B, k) or
    (B, k).  A tuple never seen in training yields p = 1 for every class.
    """
    codes = np.asarray(codes, dtype=np.int64)
    single = codes.ndim == 1
    codes = np.atleast_2d(codes)
    out = np.ones((len(codes), model.B, model.k))
    for i, (table, ptab) in enumerate(zip(model.tables, model.tuple_pvalues())):
        row = table.lookup(project_keys(codes, table.subspace))
        seen = row >= 0
        out[seen, i, :] = ptab[row[seen]]
    return out[0] if single else out


def _round(seed, rnd, codes, y, k, b2, l_max):
    rng = derived_rng(seed, "candidates", rnd)
    cands = [sample_candidate(rng, codes.shape[1], l_max) for _ in range(b2)]
    sub, table, score = select_best(cands, codes, y, k)
    return table, score


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("COST_THREADS", "0")) or (os.cpu_count() or 1)
    return max(1, int(threads))


def train(train: Dataset, validation: Dataset | None = None,
          cfg: TrainConfig = TrainConfig(), threads: int | None = 1) -> CostModel:
    """Fit the ensemble.

    Continuous features are discretised first (fitted on ``train``).  With
    the rOP combiner and no ``validation`` set, a stratified validation
    part is carved out of ``train`` to choose r; the frequency tables are
    then built from the remainder only.
    """
    if train.n == 0:
        raise ValueError("empty training set")
    if train.y is None:
        raise ValueError("training data needs single class labels")
    if train.k < 2:
        raise ValueError("need at least two classes")

    raw_schema = train.schema
    disc = Discretizer()
    if not train.is_categorical:
        disc = fit_discretizer(train, cfg.bins)
        train = apply_discretizer(disc, train)
        if validation is not None:
            validation = apply_discretizer(disc, validation)

    if cfg.combiner == "rop" and validation is None:
        train, validation = split_train_validation(train, cfg.val_fraction, cfg.seed)

    codes, y, k = train.codes, train.y, train.k
    n, d = codes.shape
    l_max = max_subspace_size(d, n)

    workers = resolve_threads(threads)
    args = [(cfg.seed, rnd, codes, y, k, cfg.b2, l_max) for rnd in range(cfg.b1)]
    if workers > 1 and cfg.b1 > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chosen = list(pool.map(lambda a: _round(*a), args))
    else:
        chosen = [_round(*a) for a in args]
    tables = [t for t, _ in chosen]
    if cfg.include_single_features:
        tables += [build_frequency_table((f,), codes, y, k) for f in range(d)]

    class_totals = tuple(int(c) for c in np.bincount(y, minlength=k))
    meta = {
        "l_max": l_max,
        "n_train": int(n),
        "n_validation": 0 if validation is None else int(validation.n),
        "candidate_sizes": "uniform",
        "rr_smoothing": "haldane-degenerate-only",
        "scores": [s for _, s in chosen],
    }
    model = CostModel(schema=raw_schema,
                      discretizer=disc, tables=tuple(tables), class_totals=class_totals,
                      r=1, config=cfg, metadata=meta)
    if cfg.combiner == "rop":
        model = replace(model, r=select_r(model, validation), _pcache=model._pcache)
    return model


def rop_accuracy_by_r(model: CostModel, validation: Dataset) -> np.ndarray:
    """Validation accuracy of argmin-rOP classification for every r in 1..B.

    Each sample's per-class p-values are sorted once; column r-1 of the
    sorted matrix is the rOP statistic for that r.
    """
    codes = model.encode(validation)
    srt = np.sort(pvalue_matrix(model, codes), axis=1)  # (m, B, k)
    B = model.B
    acc = np.empty(B)
    for r in range(1, B + 1):
        cons = stats.beta_cdf_int(srt[:, r - 1, :], r, B)
        acc[r - 1] = np.mean(cons.argmin(axis=1) == validation.y)
    return acc


def select_r(model: CostModel, validation: Dataset | None) -> int:
    """Accuracy-maximising r on ``validation``; the smallest r wins ties."""
    if model.B == 1:
        return 1
    if validation is None or validation.n < MIN_VALIDATION:
        r = math.ceil(model.B * DEFAULT_R_FRACTION)
        warnings.warn(f"validation set too small to choose r; using r={r}", stacklevel=2)
        return r
    acc = rop_accuracy_by_r(model, validation)
    return int(np.argmax(acc)) + 1


# ---------------------------------------------------------------- persistence

def model_to_dict(model: CostModel) -> dict:
    s = model.schema
    return {
        "format": FORMAT_NAME,
        "version": model.version,
        "schema": {
            "names": list(s.names),
            "kinds": list(s.kinds),
            "vocabularies": [list(v) for v in s.vocabularies],
            "labels": list(s.labels),
            "label_name": s.label_name,
            "missing_token": s.missing_token,
        },
        "discretizer": [[f, list(c)] for f, c in sorted(model.discretizer.centers.items())],
        "config": asdict(model.config),
        "class_totals": list(model.class_totals),
        "r": model.r,
        "metadata": model.metadata,
        "subspaces": [
            {"features": list(t.subspace),
             "tuples": [[*map(int, z), *map(int, c)] for z, c in zip(t.values(), t.counts)]}
            for t in model.tables
        ],
    }


def model_from_dict(doc: dict) -> CostModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ModelFormatError("not a COST model file")
    if doc.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"model format version {doc.get('version')!r} is not supported "
                               f"(reader version {FORMAT_VERSION})")
    try:
        s = doc["schema"]
        schema = FeatureSchema(names=tuple(s["names"]), kinds=tuple(s["kinds"]),
                               vocabularies=tuple(tuple(v) for v in s["vocabularies"]),
                               labels=tuple(s["labels"]), label_name=s["label_name"],
                               missing_token=s["missing_token"])
        disc = Discretizer({int(f): tuple(float(c) for c in cs) for f, cs in doc["discretizer"]})
        cfg = TrainConfig(**doc["config"])
        totals = tuple(int(c) for c in doc["class_totals"])
        k = len(totals)
        tables = []
        for sub in doc["subspaces"]:
            feats = tuple(int(f) for f in sub["features"])
            rec = np.asarray(sub["tuples"], dtype=np.int64).reshape(-1, len(feats) + k)
            tables.append(table_from_values(feats, rec[:, :len(feats)], rec[:, len(feats):],
                                            totals))
        return CostModel(schema=schema, discretizer=disc, tables=tuple(tables),
                         class_totals=totals, r=int(doc["r"]), config=cfg,
                         metadata=doc.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"corrupt model file: {exc}") from exc


def save_model(model: CostModel, path) -> None:
    text = json.dumps(model_to_dict(model), separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> CostModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: truncated or corrupt model file ({exc})") from exc
    return model_from_dict(doc)
