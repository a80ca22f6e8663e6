"""Ordinary and universal kriging in variogram form.

The ordinary system is::

    [ G  1 ] [w ]   [g0]
    [ 1' 0 ] [mu] = [1 ]

and universal kriging replaces the column of ones with first-order drift
terms ``[1, x, y]``. The sample-side matrix is LU-factored once and every
target is a back-substitution against it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spl
from scipy.spatial.distance import cdist

from aeromap.geostat.projection import LocalProjection
from aeromap.geostat.variogram import VariogramModel

KINDS = ("ordinary", "universal")

# rcond below this is treated as a singular system
_RCOND_MIN = 1e-13


class KrigingError(ValueError):
    pass


@dataclass(frozen=True)
class KrigingConfig:
    kind: str
    variogram: VariogramModel
    max_neighbors: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kriging kind must be one of {KINDS}, got {self.kind!r}")
        if self.max_neighbors is not None and self.max_neighbors < 2:
            raise ValueError("max_neighbors must be at least 2")

    @property
    def drift_terms(self) -> tuple[str, ...]:
        return ("lat", "lon") if self.kind == "universal" else ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variogram": self.variogram.to_dict(),
                "max_neighbors": self.max_neighbors}

    @classmethod
    def from_dict(cls, d) -> KrigingConfig:
        return cls(d["kind"], VariogramModel.from_dict(d["variogram"]), d.get("max_neighbors"))


@dataclass(frozen=True)
class KrigingResult:
    value: float
    variance: float


def dedupe(lat, lon, val):
    """Average samples that share identical coordinates."""
    key = np.column_stack([lat, lon])
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    if uniq.shape[0] == key.shape[0]:
        return np.asarray(lat, float), np.asarray(lon, float), np.asarray(val, float)
    sums = np.bincount(inv, weights=val)
    counts = np.bincount(inv)
    return uniq[:, 0], uniq[:, 1], sums / counts


class KrigingSystem:
    """Factored kriging system for one sample set.

    Parameters
    ----------
    config : KrigingConfig
    lat, lon, values : array_like
        Sample coordinates (degrees) and values. Duplicate locations are
        averaged before solving.
    """

    def __init__(self, config: KrigingConfig, lat, lon, values):
        lat, lon, values = dedupe(np.asarray(lat, float), np.asarray(lon, float),
                                  np.asarray(values, float))
        n = lat.size
        if n < 2:
            raise KrigingError(f"kriging needs at least 2 distinct sample locations, got {n}")
        self.config = config
        self.proj = LocalProjection.around(lat, lon)
        self.xy = self.proj.xy(lat, lon)
        self.values = values
        # drift coordinates are centred and scaled to keep the system well conditioned
        self._drift_scale = max(float(np.abs(self.xy).max()), 1.0)
        self.n = n
        self._factor = None
        if config.max_neighbors is None or config.max_neighbors >= n:
            self._factor = self._factorize(self.xy)

    def _drift(self, xy):
        m = xy.shape[0]
        if self.config.kind == "ordinary":
            return np.ones((m, 1))
        return np.column_stack([np.ones(m), xy / self._drift_scale])

    def _factorize(self, xy):
        n = xy.shape[0]
        d = cdist(xy, xy)
        G = self.config.variogram(d)
        gmax = float(np.abs(G).max())
        # the semivariance block is solved in units of its largest entry so the
        # condition estimate reflects geometry rather than the field's units
        gscale = gmax if gmax > 0 else 1.0
        G = G / gscale
        F = self._drift(xy)
        k = F.shape[1]
        A = np.zeros((n + k, n + k))
        A[:n, :n] = G
        A[:n, n:] = F
        A[n:, :n] = F.T
        if n <= k and self.config.kind == "universal":
            raise KrigingError(f"universal kriging with {k - 1} drift terms needs more than {k} points")
        with warnings.catch_warnings():
            # exact singularity is reported below through the condition estimate
            warnings.simplefilter("ignore", spl.LinAlgWarning)
            lu, piv = spl.lu_factor(A, check_finite=False)
        anorm = np.abs(A).sum(axis=0).max()
        rcond, info = spl.lapack.dgecon(lu, anorm, norm="1")
        if info != 0 or not rcond > _RCOND_MIN:
            what = ("collinear or too few sample locations for the linear drift"
                    if self.config.kind == "universal" else "degenerate sample geometry")
            raise KrigingError(f"singular kriging system ({what}); rcond={rcond:.3g}")
        return lu, piv, gscale

    def _solve(self, factor, xy_s, xy_t):
        lu, piv, gscale = factor
        d0 = cdist(xy_s, xy_t)
        g0 = self.config.variogram(d0) / gscale
        rhs = np.vstack([g0, self._drift(xy_t).T])
        sol = spl.lu_solve((lu, piv), rhs, check_finite=False)
        var = np.einsum("ij,ij->j", sol, rhs) * gscale
        tol = 1e-9 * max(1.0, gscale)
        if np.any(var < -tol):
            raise KrigingError(f"negative kriging variance {var.min():.3g}")
        return sol[: xy_s.shape[0]], np.maximum(var, 0.0)

    def _targets_xy(self, lat, lon):
        return self.proj.xy(np.asarray(lat, float).ravel(), np.asarray(lon, float).ravel())

    def weights(self, lat, lon) -> np.ndarray:
        """``(n_samples, n_targets)`` kriging weights (global neighbourhood only)."""
        if self._factor is None:
            raise KrigingError("weights are only exposed for global neighbourhoods")
        w, _ = self._solve(self._factor, self.xy, self._targets_xy(lat, lon))
        return w

    def predict(self, lat, lon, chunk=4096) -> tuple[np.ndarray, np.ndarray]:
        """Predictions and kriging variances at the target coordinates."""
        xy_t = self._targets_xy(lat, lon)
        pred = np.empty(xy_t.shape[0])
        var = np.empty(xy_t.shape[0])
        if self._factor is not None:
            for s in range(0, xy_t.shape[0], chunk):
                w, v = self._solve(self._factor, self.xy, xy_t[s:s + chunk])
                pred[s:s + chunk] = self.values @ w
                var[s:s + chunk] = v
            return pred, var
        k = self.config.max_neighbors
        for t in range(xy_t.shape[0]):
            d = np.hypot(*(self.xy - xy_t[t]).T)
            idx = np.sort(np.argsort(d, kind="stable")[:k])
            factor = self._factorize(self.xy[idx])
            w, v = self._solve(factor, self.xy[idx], xy_t[t:t + 1])
            pred[t] = self.values[idx] @ w[:, 0]
            var[t] = v[0]
        return pred, var


def krige_arrays(config: KrigingConfig, lat, lon, values, target_lat, target_lon):
    return KrigingSystem(config, lat, lon, values).predict(target_lat, target_lon)


def krige(config: KrigingConfig, samples, targets) -> list[KrigingResult]:
    """Krige ``(lat, lon, value)`` samples onto ``(lat, lon)`` targets."""
    s = np.asarray(samples, dtype=float).reshape(-1, 3)
    t = np.asarray(targets, dtype=float).reshape(-1, 2)
    pred, var = krige_arrays(config, s[:, 0], s[:, 1], s[:, 2], t[:, 0], t[:, 1])
    return [KrigingResult(float(p), float(v)) for p, v in zip(pred, var)]
