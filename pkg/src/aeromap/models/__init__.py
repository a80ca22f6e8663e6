"""Regression models: linear family, tree ensembles, metrics and analyses."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from aeromap.datamodel import Sample
from aeromap.models.analysis import (
    AblationRow,
    ImportanceReport,
    correlation_matrix,
    feature_importance,
    run_ablation,
)
from aeromap.models.evaluation import (
    EvalReport,
    cross_validate,
    evaluate,
    kfold_labels,
    split_indices,
    split_train_test,
    summarize,
)
from aeromap.models.linear import LINEAR_KINDS, LinearModel, RankDeficientError, fit_linear
from aeromap.models.trees import FOREST_KINDS, BoostingHistory, Tree, TreeEnsemble, fit_forest, fit_gbt

__all__ = [
    "FOREST_KINDS",
    "LINEAR_KINDS",
    "AblationRow",
    "BoostingHistory",
    "EvalReport",
    "ImportanceReport",
    "LinearModel",
    "RankDeficientError",
    "Tree",
    "TreeEnsemble",
    "correlation_matrix",
    "cross_validate",
    "evaluate",
    "feature_importance",
    "fit_forest",
    "fit_gbt",
    "fit_linear",
    "fit_model",
    "kfold_labels",
    "predict",
    "run_ablation",
    "split_indices",
    "split_train_test",
    "summarize",
]


def fit_model(kind, X, y, features, config=None, seed=None, threads=None,
              X_valid=None, y_valid=None):
    """Fit any supported model kind with hyperparameters from ``config``.

    ``config`` is a :class:`aeromap.io.config.PipelineConfig`; defaults are
    used when it is ``None``. ``seed`` overrides ``config.seed``.
    """
    from aeromap.io.config import PipelineConfig

    cfg = config or PipelineConfig()
    seed = cfg.seed if seed is None else seed
    threads = cfg.threads if threads is None else threads
    if kind in ("Univariate", "Multivariate"):
        return fit_linear(X, y, features, kind)
    if kind == "Ridge":
        return fit_linear(X, y, features, kind, cfg.ridge_lambda)
    if kind == "Lasso":
        return fit_linear(X, y, features, kind, cfg.lasso_lambda)
    if kind == "RandomForest":
        return fit_forest(X, y, features, kind, cfg.rf_n_estimators, cfg.rf_max_depth,
                          cfg.rf_max_features, cfg.rf_min_samples_leaf, seed, threads)
    if kind == "ExtraTrees":
        return fit_forest(X, y, features, kind, cfg.et_n_estimators, cfg.et_max_depth,
                          cfg.et_max_features, cfg.et_min_samples_leaf, seed, threads)
    if kind == "GradientBoosting":
        return fit_gbt(X, y, features, cfg.gb_n_estimators, cfg.gb_learning_rate,
                       cfg.gb_max_depth, cfg.gb_max_features, cfg.gb_min_child_weight,
                       cfg.gb_gamma, cfg.gb_reg_lambda, seed, X_valid, y_valid,
                       cfg.gb_early_stopping_rounds)
    raise ValueError(f"unknown model kind {kind!r}")


def _columns(table) -> Mapping:
    if isinstance(table, Mapping):
        return table
    rows = list(table)
    if rows and isinstance(rows[0], Sample):
        return {name: [s.features[name] for s in rows] for name in rows[0].features}
    raise TypeError("feature table must be a mapping of columns or a list of samples")


def predict(model, table) -> np.ndarray:
    """Predict from a feature table addressed by name.

    ``table`` maps feature names to equal-length columns (or is a list of
    :class:`Sample`). Extra columns are ignored; a missing one raises
    ``KeyError`` naming it.
    """
    cols = _columns(table)
    missing = [f for f in model.features if f not in cols]
    if missing:
        raise KeyError(f"feature table lacks {', '.join(missing)}")
    X = np.column_stack([np.asarray(cols[f], dtype=np.float64).ravel() for f in model.features])
    return model.predict_matrix(X)
