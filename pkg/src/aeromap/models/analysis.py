"""Gain importance, feature correlations and the feature-ablation study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aeromap.models.evaluation import evaluate, split_indices


@dataclass(frozen=True)
class ImportanceReport:
    features: tuple
    share: np.ndarray
    total_gain: float

    @property
    def has_splits(self) -> bool:
        return self.total_gain > 0

    def ranking(self) -> list[tuple[str, float]]:
        """Features by descending share; empty when the model never split."""
        if not self.has_splits:
            return []
        order = sorted(range(len(self.features)), key=lambda i: (-self.share[i], i))
        return [(self.features[i], float(self.share[i])) for i in order]

    def to_dict(self) -> dict:
        return {"has_splits": self.has_splits, "total_gain": self.total_gain,
                "ranking": [{"feature": f, "share": s} for f, s in self.ranking()]}


def feature_importance(model) -> ImportanceReport:
    """Split gain summed per feature over every tree, normalized to one."""
    p = len(model.features)
    total = np.zeros(p)
    for tree in model.trees:
        split = tree.feature >= 0
        total += np.bincount(tree.feature[split], weights=tree.gain[split], minlength=p)
    s = float(total.sum())
    share = total / s if s > 0 else np.zeros(p)
    return ImportanceReport(tuple(model.features), share, s)


def correlation_matrix(X, y, features, target="PM_c"):
    """Absolute Pearson correlations among the features and the target.

    Returns ``(names, matrix)`` where ``names`` is the features followed by
    the target. A zero-variance column correlates 0 with everything except
    itself.
    """
    A = np.column_stack([np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)])
    A = A - A.mean(axis=0)
    norm = np.sqrt((A * A).sum(axis=0))
    safe = np.where(norm > 0, norm, 1.0)
    C = np.abs((A.T @ A) / np.outer(safe, safe))
    C = np.clip((C + C.T) / 2, 0.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return list(features) + [target], C


@dataclass(frozen=True)
class AblationRow:
    setting: str
    removed: tuple
    rmse: float
    mae: float
    r2: float

    def to_dict(self) -> dict:
        return {"setting": self.setting, "removed": list(self.removed), "rmse": self.rmse,
                "mae": self.mae, "r2": self.r2}


def run_ablation(X, y, features, settings, fit, fraction=0.7, seed=0) -> list[AblationRow]:
    """Retrain on one fixed split with each feature group removed.

    ``fit(X_train, y_train, features)`` returns a model with
    ``predict_matrix``. Row ``S0`` is the all-feature baseline; row ``Sk``
    drops ``settings[k-1]``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    features = tuple(features)
    unknown = sorted({f for s in settings for f in s} - set(features))
    if unknown:
        raise ValueError(f"ablation names unknown features: {', '.join(unknown)}")
    tr, te = split_indices(y.size, fraction, seed)
    rows = []
    for k, removed in enumerate([()] + [tuple(s) for s in settings]):
        keep = [i for i, f in enumerate(features) if f not in removed]
        kept = tuple(features[i] for i in keep)
        model = fit(X[np.ix_(tr, keep)], y[tr], kept)
        rep = evaluate(model.predict_matrix(X[np.ix_(te, keep)]), y[te])
        rows.append(AblationRow(f"S{k}", removed, rep.rmse, rep.mae, rep.r2))
    return rows
