"""Semivariogram models, empirical binning and weighted least-squares fits.

Distances are metres in a local equirectangular projection. ``sill`` is the
total sill (nugget included) for the bounded families; ``range`` is the
distance at which the spherical model reaches its sill and the practical
range (95% of the partial sill) of the Gaussian model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from aeromap import _accel
from aeromap.geostat.projection import LocalProjection

FAMILIES = ("linear", "spherical", "gaussian", "power")


@dataclass(frozen=True)
class VariogramModel:
    family: str
    nugget: float = 0.0
    sill: float = 1.0
    range: float = 1.0
    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown variogram family {self.family!r}")
        if self.nugget < 0:
            raise ValueError("nugget must be non-negative")
        if self.family in ("spherical", "gaussian"):
            if self.sill < self.nugget:
                raise ValueError("sill must be at least the nugget")
            if not self.range > 0:
                raise ValueError("range must be positive")
        else:
            if self.scale < 0:
                raise ValueError("scale must be non-negative")
            if self.family == "power" and not 0 < self.exponent < 2:
                raise ValueError("power exponent must lie in (0, 2)")

    def __call__(self, h):
        """Semivariance at lag ``h``; exactly zero at ``h == 0``."""
        h = np.asarray(h, dtype=np.float64)
        if self.family == "linear":
            g = self.nugget + self.scale * h
        elif self.family == "power":
            g = self.nugget + self.scale * h ** self.exponent
        elif self.family == "spherical":
            r = np.minimum(h / self.range, 1.0)
            g = self.nugget + (self.sill - self.nugget) * (1.5 * r - 0.5 * r ** 3)
        else:
            g = self.nugget + (self.sill - self.nugget) * (1.0 - np.exp(-3.0 * (h / self.range) ** 2))
        return np.where(h > 0, g, 0.0)

    @property
    def params(self) -> dict:
        if self.family in ("spherical", "gaussian"):
            return {"nugget": self.nugget, "sill": self.sill, "range": self.range}
        if self.family == "linear":
            return {"nugget": self.nugget, "scale": self.scale}
        return {"nugget": self.nugget, "scale": self.scale, "exponent": self.exponent}

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> VariogramModel:
        return cls(**d)


@_accel.njit(cache=True, nogil=True)
def _bin_pairs_nb(xy, v, width, n_bins, max_dist):
    n = xy.shape[0]
    sv = np.zeros(n_bins)
    sd = np.zeros(n_bins)
    cnt = np.zeros(n_bins, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            dx = xy[j, 0] - xy[i, 0]
            dy = xy[j, 1] - xy[i, 1]
            d = np.sqrt(dx * dx + dy * dy)
            if d > max_dist:
                continue
            b = int(d / width)
            if b >= n_bins:
                b = n_bins - 1
            dv = v[i] - v[j]
            sv[b] += 0.5 * dv * dv
            sd[b] += d
            cnt[b] += 1
    return sv, sd, cnt


def _bin_pairs_np(xy, v, width, n_bins, max_dist):
    i, j = np.triu_indices(xy.shape[0], k=1)
    dx = xy[j, 0] - xy[i, 0]
    dy = xy[j, 1] - xy[i, 1]
    d = np.sqrt(dx * dx + dy * dy)
    keep = d <= max_dist
    d, i, j = d[keep], i[keep], j[keep]
    b = np.minimum((d / width).astype(np.int64), n_bins - 1)
    dv = v[i] - v[j]
    # bincount accumulates in input order, matching the loop kernel
    sv = np.bincount(b, weights=0.5 * dv * dv, minlength=n_bins)
    sd = np.bincount(b, weights=d, minlength=n_bins)
    cnt = np.bincount(b, minlength=n_bins).astype(np.int64)
    return sv, sd, cnt


def _max_pair_distance(xy):
    # O(n) bound is not enough here; n stays in the hundreds
    d = 0.0
    for k in range(0, xy.shape[0], 256):
        blk = xy[k:k + 256]
        dd = np.sqrt(((blk[:, None, :] - xy[None, :, :]) ** 2).sum(-1))
        d = max(d, float(dd.max()))
    return d


@dataclass(frozen=True)
class EmpiricalVariogram:
    lag: np.ndarray
    semivariance: np.ndarray
    count: np.ndarray

    def __len__(self):
        return self.lag.size

    def rows(self) -> list[tuple[float, float, int]]:
        return [(float(a), float(b), int(c)) for a, b, c in zip(self.lag, self.semivariance, self.count)]


def empirical_variogram(points, n_bins=12, max_dist=None, projection=None) -> EmpiricalVariogram:
    """Binned semivariogram of ``(lat, lon, value)`` points.

    Each non-empty bin reports the mean pair distance, the mean of
    ``0.5 * (v_i - v_j)**2`` and the pair count. ``max_dist`` (metres)
    defaults to half the largest pairwise distance.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
        raise ValueError("need at least two (lat, lon, value) points")
    proj = projection or LocalProjection.around(pts[:, 0], pts[:, 1])
    xy = np.ascontiguousarray(proj.xy(pts[:, 0], pts[:, 1]))
    v = np.ascontiguousarray(pts[:, 2])
    dmax_all = _max_pair_distance(xy)
    if dmax_all == 0:
        raise ValueError("all points are coincident; no lag information")
    if max_dist is None:
        max_dist = 0.5 * dmax_all
    if not max_dist > 0:
        raise ValueError("max_dist must be positive")
    width = max_dist / n_bins
    kernel = _bin_pairs_nb if _accel.USE_NUMBA else _bin_pairs_np
    sv, sd, cnt = kernel(xy, v, float(width), int(n_bins), float(max_dist))
    nz = cnt > 0
    return EmpiricalVariogram(sd[nz] / cnt[nz], sv[nz] / cnt[nz], cnt[nz])


class VariogramFitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


def _shape(family, h, t):
    """Unit-sill shape of ``family`` at normalised lag ``h`` for range/exponent ``t``."""
    if family == "spherical":
        r = np.minimum(h / t, 1.0)
        return 1.5 * r - 0.5 * r ** 3
    if family == "gaussian":
        return 1.0 - np.exp(-3.0 * (h / t) ** 2)
    if family == "power":
        return h ** t
    return h


def _nnls2(B, y):
    """Non-negative least squares with two columns, by enumerating active sets."""
    a, b = B[:, 0], B[:, 1]
    aa, ab, bb = a @ a, a @ b, b @ b
    ay, by = a @ y, b @ y
    cands = []
    det = aa * bb - ab * ab
    if det > 1e-14 * aa * bb:
        c0 = (bb * ay - ab * by) / det
        c1 = (aa * by - ab * ay) / det
        if c0 >= 0 and c1 >= 0:
            cands.append((c0, c1))
    if not cands:
        cands.append((max(ay / aa, 0.0), 0.0) if aa > 0 else (0.0, 0.0))
        cands.append((0.0, max(by / bb, 0.0)) if bb > 0 else (0.0, 0.0))
    best, best_r = None, np.inf
    for c in cands:
        r = float(np.linalg.norm(y - c[0] * a - c[1] * b))
        if r < best_r:
            best, best_r = np.array(c), r
    return best, best_r


# search interval for the nonlinear parameter, in normalised units
_T_BOUNDS = {"spherical": (1e-3, 10.0), "gaussian": (1e-3, 10.0), "power": (1e-3, 1.999)}
_GRID = 48


def fit_variogram(empirical: EmpiricalVariogram, family: str) -> tuple[VariogramModel, float]:
    """Pair-count weighted least squares fit of one family.

    Minimises ``sum(count * (model(lag) - semivariance)**2)``. Nugget and
    partial sill (or slope) enter linearly and are solved exactly under
    non-negativity for each trial range (or power exponent); that single
    nonlinear parameter is scanned on a log grid and refined with Brent's
    method. Returns the model and the weighted residual norm.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown variogram family {family!r}")
    lag = np.asarray(empirical.lag, dtype=np.float64)
    sv = np.asarray(empirical.semivariance, dtype=np.float64)
    w = np.sqrt(np.asarray(empirical.count, dtype=np.float64))
    if lag.size < 3:
        raise ValueError(f"need at least 3 non-empty lag bins, got {lag.size}")
    # work in units of the largest lag and semivariance for conditioning
    hs = float(lag.max())
    ss = float(max(np.abs(sv).max(), 1e-300))
    lag_n, y = lag / hs, w * sv / ss

    def solve(t):
        B = np.column_stack([w, w * _shape(family, lag_n, t)])
        return _nnls2(B, y)

    if family == "linear":
        best_t = 1.0
    else:
        lo, hi = _T_BOUNDS[family]
        grid = np.geomspace(lo, hi, _GRID)
        cost = np.array([solve(t)[1] for t in grid])
        if not np.isfinite(cost).any():
            raise VariogramFitError(f"{family} fit failed: no finite residual on the search grid")
        k = int(np.nanargmin(cost))
        a, b = np.log(grid[max(k - 1, 0)]), np.log(grid[min(k + 1, _GRID - 1)])
        res = minimize_scalar(lambda u: solve(np.exp(u))[1], bounds=(a, b), method="bounded",
                              options={"xatol": 1e-12, "maxiter": 500})
        best_t = float(np.exp(res.x)) if res.fun <= cost[k] else float(grid[k])
    coef, rnorm = solve(best_t)
    if not np.all(np.isfinite(coef)):
        raise VariogramFitError(f"{family} fit produced non-finite parameters", best=coef)
    try:
        model = _rescale(family, coef, best_t, hs, ss)
    except ValueError as exc:
        raise VariogramFitError(f"{family} fit left the feasible region: {exc}",
                                best=coef) from None
    return model, float(rnorm * ss)


def _rescale(family, coef, t, hs, ss) -> VariogramModel:
    nugget, c = float(coef[0]), float(coef[1])
    if family in ("spherical", "gaussian"):
        return VariogramModel(family, nugget=nugget * ss, sill=(nugget + c) * ss, range=t * hs)
    if family == "linear":
        return VariogramModel(family, nugget=nugget * ss, scale=c * ss / hs)
    return VariogramModel(family, nugget=nugget * ss, scale=c * ss / hs ** t, exponent=t)
