"""Kriging setup: variogram fitting per kind, and k-fold CV grid search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aeromap.geostat.kriging import KINDS, KrigingConfig, KrigingError, KrigingSystem
from aeromap.geostat.projection import LocalProjection
from aeromap.geostat.variogram import (
    FAMILIES,
    VariogramFitError,
    empirical_variogram,
    fit_variogram,
)


def _detrend(lat, lon, values):
    xy = LocalProjection.around(lat, lon).xy(lat, lon)
    scale = max(float(np.abs(xy).max()), 1.0)
    F = np.column_stack([np.ones(lat.size), xy / scale])
    coef, *_ = np.linalg.lstsq(F, values, rcond=None)
    return values - F @ coef


def fit_kriging(kind: str, family: str, lat, lon, values, n_bins=12, max_dist=None,
                max_neighbors=None) -> KrigingConfig:
    """Fit a variogram of ``family`` and wrap it in a :class:`KrigingConfig`.

    Universal kriging fits the variogram to residuals of a first-order
    (lat, lon) trend so the drift does not leak into the sill.
    """
    lat, lon, values = (np.asarray(a, dtype=float) for a in (lat, lon, values))
    resid = _detrend(lat, lon, values) if kind == "universal" else values
    emp = empirical_variogram(np.column_stack([lat, lon, resid]), n_bins=n_bins, max_dist=max_dist)
    model, _ = fit_variogram(emp, family)
    return KrigingConfig(kind, model, max_neighbors)


@dataclass
class CvCell:
    kind: str
    family: str
    fold_rmse: list = field(default_factory=list)
    config: KrigingConfig | None = None

    @property
    def mean_rmse(self) -> float:
        if not self.fold_rmse:
            return math.inf
        return float(np.mean(self.fold_rmse))

    def to_dict(self) -> dict:
        enc = [r if math.isfinite(r) else None for r in self.fold_rmse]
        m = self.mean_rmse
        return {"kind": self.kind, "family": self.family, "fold_rmse": enc,
                "mean_rmse": m if math.isfinite(m) else None}


def fold_assignment(n: int, k: int, seed) -> np.ndarray:
    """Seeded fold labels: a shuffled round-robin, so fold sizes differ by at most one."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % k
    rng.shuffle(labels)
    return labels


def grid_search_kriging(samples, kinds=KINDS, families=FAMILIES, folds=5, seed=0,
                        n_bins=12, max_dist=None) -> tuple[KrigingConfig, list[CvCell]]:
    """Choose a (kind, family) pair by k-fold CV RMSE.

    Every cell is scored on the same seeded folds. A cell whose variogram
    fit or kriging solve fails on any fold scores ``+inf``. The winner is
    refitted on all samples; ties go to the earlier cell in iteration order.
    """
    s = np.asarray(samples, dtype=float).reshape(-1, 3)
    n = s.shape[0]
    if n < 2 * folds:
        raise ValueError(f"{n} samples are too few for {folds}-fold cross-validation")
    labels = fold_assignment(n, folds, seed)
    table = []
    for kind in kinds:
        for family in families:
            cell = CvCell(kind, family)
            for f in range(folds):
                tr, te = labels != f, labels == f
                try:
                    cfg = fit_kriging(kind, family, s[tr, 0], s[tr, 1], s[tr, 2], n_bins, max_dist)
                    pred, _ = KrigingSystem(cfg, s[tr, 0], s[tr, 1], s[tr, 2]).predict(
                        s[te, 0], s[te, 1])
                    rmse = float(np.sqrt(np.mean((pred - s[te, 2]) ** 2)))
                except (KrigingError, VariogramFitError, ValueError, np.linalg.LinAlgError):
                    rmse = math.inf
                cell.fold_rmse.append(rmse if math.isfinite(rmse) else math.inf)
            table.append(cell)
    best = min(table, key=lambda c: c.mean_rmse)
    if not math.isfinite(best.mean_rmse):
        raise KrigingError("no (kind, family) cell could be cross-validated")
    best.config = fit_kriging(best.kind, best.family, s[:, 0], s[:, 1], s[:, 2], n_bins, max_dist)
    return best.config, table
