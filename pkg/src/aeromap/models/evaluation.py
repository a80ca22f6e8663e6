"""Error metrics, train/test splitting and k-fold cross-validation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    """RMSE and MAE in target units; ``r2`` is the squared Pearson correlation.

    ``r2_defined`` is false when either vector has zero variance, in which
    case ``r2`` is reported as 0.
    """

    rmse: float
    mae: float
    r2: float
    n: int
    label: str = "test"
    bias: float = 0.0
    r2_defined: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(predicted, observed, label="test") -> EvalReport:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    o = np.asarray(observed, dtype=np.float64).ravel()
    if p.shape != o.shape:
        raise ValueError(f"{p.size} predictions for {o.size} observations")
    if p.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    e = p - o
    rmse = math.sqrt(float(np.mean(e * e)))
    mae = float(np.mean(np.abs(e)))
    dp, do = p - p.mean(), o - o.mean()
    spp, soo = float(dp @ dp), float(do @ do)
    if spp > 0 and soo > 0:
        r = float(dp @ do) / math.sqrt(spp * soo)
        r2, defined = min(r * r, 1.0), True
    else:
        r2, defined = 0.0, False
    return EvalReport(rmse, mae, r2, int(p.size), label, float(e.mean()), defined)


def split_indices(n: int, fraction=0.7, seed=0, mode="random", order_key=None):
    """Index arrays ``(train, test)``, disjoint and together covering ``range(n)``.

    ``random`` shuffles with the seed; ``temporal`` keeps the earliest
    ``fraction`` of samples by ``order_key`` (e.g. dates) for training.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    if n < 2:
        raise ValueError("need at least 2 samples to split")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    if mode == "random":
        perm = np.random.default_rng(seed).permutation(n)
    elif mode == "temporal":
        if order_key is None:
            raise ValueError("a temporal split needs an order key")
        perm = np.argsort(np.asarray(order_key), kind="stable")
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(samples, fraction=0.7, seed=0, mode="random"):
    """Split a sample list; a temporal split orders by ``sample.date``."""
    key = [s.date.toordinal() for s in samples] if mode == "temporal" else None
    tr, te = split_indices(len(samples), fraction, seed, mode, key)
    return [samples[i] for i in tr], [samples[i] for i in te]


def kfold_labels(n: int, k: int, seed) -> np.ndarray:
    """Seeded fold label per sample; fold sizes differ by at most one."""
    if not 2 <= k <= n:
        raise ValueError(f"cannot make {k} folds from {n} samples")
    labels = np.arange(n) % k
    np.random.default_rng(seed).shuffle(labels)
    return labels


def cross_validate(X, y, fit, k=5, seed=0) -> list[EvalReport]:
    """Per-fold validation reports for ``fit(X_train, y_train) -> model``.

    The model must expose ``predict_matrix``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    labels = kfold_labels(y.size, k, seed)
    reports = []
    for f in range(k):
        tr, va = labels != f, labels == f
        model = fit(X[tr], y[tr])
        reports.append(evaluate(model.predict_matrix(X[va]), y[va], f"cv-fold-{f}"))
    return reports


def summarize(reports) -> dict:
    return {key: float(np.mean([getattr(r, key) for r in reports])) for key in ("rmse", "mae", "r2")}
