"""Random forest, extra trees and least-squares gradient boosting."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from aeromap import _accel
from aeromap.models._tree_kernels import (
    SPLIT_BEST,
    SPLIT_RANDOM,
    build_tree,
    max_nodes,
    predict_sum,
    presort,
    sample_columns,
)

FOREST_KINDS = ("RandomForest", "ExtraTrees")


@dataclass(frozen=True)
class Tree:
    """Flat binary regression tree. ``feature == -1`` marks a leaf.

    Samples with ``x[feature] <= threshold`` go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def depth(self) -> int:
        d = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                d[self.left[i]] = d[i] + 1
                d[self.right[i]] = d[i] + 1
        return int(d.max(initial=0))

    def predict(self, X) -> np.ndarray:
        return predict_sum(X, self.feature, self.threshold, self.left, self.right,
                           self.value, np.zeros(1, dtype=np.int64))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        return cls(np.array(d["feature"], dtype=np.int64),
                   np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.int64),
                   np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=np.float64),
                   np.array(d["count"], dtype=np.int64),
                   np.array(d["gain"], dtype=np.float64))


@dataclass
class TreeEnsemble:
    kind: str
    features: tuple
    trees: list
    params: dict = field(default_factory=dict)
    learning_rate: float = 1.0
    base_score: float = 0.0
    _packed: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            offs = np.cumsum([0] + [t.n_nodes for t in self.trees[:-1]]).astype(np.int64)
            cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
            left = np.concatenate([np.where(t.left >= 0, t.left + o, -1)
                                   for t, o in zip(self.trees, offs)])
            right = np.concatenate([np.where(t.right >= 0, t.right + o, -1)
                                    for t, o in zip(self.trees, offs)])
            self._packed = (cat("feature"), cat("threshold"), left, right, cat("value"), offs)
        return self._packed

    def tree_sum(self, X) -> np.ndarray:
        if not self.trees:
            return np.zeros(np.asarray(X).shape[0])
        f, t, lft, rgt, v, roots = self._pack()
        return predict_sum(X, f, t, lft, rgt, v, roots)

    def predict_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.kind == "GradientBoosting":
            return self.base_score + self.learning_rate * self.tree_sum(X)
        return self.tree_sum(X) / len(self.trees)


def _feature_count(max_features, p) -> int:
    if max_features is None:
        return p
    if isinstance(max_features, int) and not isinstance(max_features, bool) and max_features > 1:
        return min(max_features, p)
    return max(1, min(p, int(max_features * p)))


def _uniforms(rng, cap, p):
    return rng.random((cap, p)), rng.random((cap, p))


def _make_tree(out) -> Tree:
    return Tree(*out[:7])


def fit_forest(X, y, features, kind="RandomForest", n_estimators=500, max_depth=10,
               max_features=0.5, min_samples_leaf=1, seed=0, threads=None) -> TreeEnsemble:
    """Grow a random forest (bootstrap, exhaustive thresholds) or extra
    trees (no bootstrap, one random threshold per candidate feature).

    Each tree draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on ``threads``.
    """
    if kind not in FOREST_KINDS:
        raise ValueError(f"forest kind must be one of {FOREST_KINDS}, got {kind!r}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ValueError("a forest needs at least 2 samples")
    depth = max_depth if max_depth is not None else 10 ** 6
    k = _feature_count(max_features, p)
    mode = SPLIT_BEST if kind == "RandomForest" else SPLIT_RANDOM
    bootstrap = kind == "RandomForest"
    children = np.random.SeedSequence(seed).spawn(n_estimators)

    def grow(ss):
        rng = np.random.default_rng(ss)
        sidx = np.sort(rng.integers(0, n, n)) if bootstrap else np.arange(n)
        cap = max_nodes(n, max_depth)
        fu, tu = _uniforms(rng, cap, p)
        xc = shared_xc if shared_xc is not None else sample_columns(X, sidx)
        return _make_tree(build_tree(xc, y[sidx], mode, depth, min_samples_leaf, 0.0, 0.0,
                                     k, fu, tu))

    shared_xc = None if bootstrap else sample_columns(X, np.arange(n))

    workers = _accel.thread_count(threads)
    if workers > 1 and _accel.USE_NUMBA:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(c) for c in children]
    params = {"n_estimators": n_estimators, "max_depth": max_depth, "max_features": max_features,
              "min_samples_leaf": min_samples_leaf, "seed": seed}
    return TreeEnsemble(kind, tuple(features), trees, params)


@dataclass
class BoostingHistory:
    train_mse: list = field(default_factory=list)
    valid_rmse: list = field(default_factory=list)
    best_iteration: int | None = None


def fit_gbt(X, y, features, n_estimators=2000, learning_rate=0.3, max_depth=6,
            max_features=1.0, min_child_weight=1.0, gamma=0.0, reg_lambda=0.0, seed=0,
            X_valid=None, y_valid=None, early_stopping_rounds=None,
            history: BoostingHistory | None = None) -> TreeEnsemble:
    """Stagewise least-squares boosting.

    The base score is the target mean; each stage fits a depth-limited tree
    to the current residuals. Leaves hold ``sum(residual) / (n + reg_lambda)``
    and a split must gain more than ``gamma`` (half the squared-error drop
    with the same ``reg_lambda`` shrinkage). Every sample carries unit
    hessian, so ``min_child_weight`` is a minimum leaf size.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ValueError("boosting needs at least 2 samples")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must lie in (0, 1]")
    history = history if history is not None else BoostingHistory()
    k = _feature_count(max_features, p)
    min_leaf = max(1, int(math.ceil(min_child_weight)))
    base = float(np.mean(y))
    pred = np.full(n, base)
    xc = sample_columns(X, np.arange(n))
    root_order = presort(xc)
    cap = max_nodes(n, max_depth)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    use_valid = X_valid is not None and y_valid is not None
    if use_valid:
        X_valid = np.ascontiguousarray(X_valid, dtype=np.float64)
        y_valid = np.asarray(y_valid, dtype=np.float64)
        vsum = np.zeros(X_valid.shape[0])
        best_rmse, best_it = math.inf, 0
    trees = []
    for it in range(n_estimators):
        fu = rng.random((cap, p)) if k < p else np.zeros((cap, p))
        out = build_tree(xc, y - pred, SPLIT_BEST, max_depth, min_leaf, reg_lambda, gamma,
                         k, fu, np.zeros((1, p)), root_order)
        tree = _make_tree(out)
        trees.append(tree)
        pred = pred + learning_rate * tree.value[out[7]]
        history.train_mse.append(float(np.mean((y - pred) ** 2)))
        if use_valid:
            vsum += tree.predict(X_valid)
            rmse = float(np.sqrt(np.mean((base + learning_rate * vsum - y_valid) ** 2)))
            history.valid_rmse.append(rmse)
            if rmse < best_rmse:
                best_rmse, best_it = rmse, it
            elif early_stopping_rounds and it - best_it >= early_stopping_rounds:
                break
    if use_valid and early_stopping_rounds:
        trees = trees[: best_it + 1]
        history.best_iteration = best_it
    params = {"n_estimators": n_estimators, "max_depth": max_depth, "max_features": max_features,
              "min_child_weight": min_child_weight, "gamma": gamma, "reg_lambda": reg_lambda,
              "seed": seed, "early_stopping_rounds": early_stopping_rounds}
    return TreeEnsemble("GradientBoosting", tuple(features), trees, params,
                        learning_rate=learning_rate, base_score=base)
