"""Subspace ensemble classifier built on exact association tests.

Each selected feature subspace yields a one-sided Fisher exact p-value per
class; the per-class p-values are merged with the r-th ordered p-value
method (or Fisher / minP / maxP) into consensus p-values that drive regular,
reject and refine decisions.
"""

__version__ = "0.1.0"

from .data import (REJECT, REJECT_TOKEN, Dataset, DataError, Discretizer, FeatureSchema,
                   apply_discretizer, fit_discretizer, load_csv, load_with_schema,
                   split_train_validation, stratified_kfold)
from .evaluate import EvalReport, cross_validate, jaccard, score
from .model import CostModel, ModelFormatError, TrainConfig, load_model, pvalue_matrix, \
    save_model, select_r, train
from .predict import (PredictionOutcome, bagging_oracle, classify, classify_selective,
                      consensus_pvalues, decide)

__all__ = [
    "REJECT", "REJECT_TOKEN", "Dataset", "DataError", "Discretizer", "FeatureSchema",
    "apply_discretizer", "fit_discretizer", "load_csv", "load_with_schema",
    "split_train_validation", "stratified_kfold", "EvalReport", "cross_validate", "jaccard",
    "score", "CostModel", "ModelFormatError", "TrainConfig", "load_model", "pvalue_matrix",
    "save_model", "select_r", "train", "PredictionOutcome", "bagging_oracle", "classify",
    "classify_selective", "consensus_pvalues", "decide",
]
