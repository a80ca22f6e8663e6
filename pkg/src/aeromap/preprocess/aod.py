"""AOD preparation: windowed extraction, QA probabilities, normalization and
Aqua/Terra merging."""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from aeromap.datamodel import Cell, QaRaster, Raster, Season, season_of
from aeromap.preprocess._window import window_stats
from aeromap.preprocess.pm import DomainError


@dataclass(frozen=True)
class WindowExtract:
    aod_mean: float
    n_valid: int
    aod_std: float
    prob_med: float
    prob_best: float
    valid: bool


@dataclass(frozen=True)
class WindowGrid:
    """:class:`WindowExtract` fields for every cell of a grid at once."""

    aod_mean: np.ndarray
    aod_std: np.ndarray
    n_valid: np.ndarray
    prob_med: np.ndarray
    prob_best: np.ndarray
    valid: np.ndarray

    def at(self, cell: Cell) -> WindowExtract:
        r, c = cell
        return WindowExtract(float(self.aod_mean[r, c]), int(self.n_valid[r, c]),
                             float(self.aod_std[r, c]), float(self.prob_med[r, c]),
                             float(self.prob_best[r, c]), bool(self.valid[r, c]))


def extract_windows(aod: Raster, qa: QaRaster, window=3, min_valid_pixels=3,
                    std_threshold=0.5) -> WindowGrid:
    """Window statistics centred on every cell.

    A window is valid when it holds more than ``min_valid_pixels`` AODs and
    their sample standard deviation does not exceed ``std_threshold``. The
    QA probabilities count pixels that carry a valid AOD *and* meet the
    condition, divided by the full window area.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be an odd positive integer, got {window}")
    if not aod.spec.compatible(qa.spec):
        raise ValueError("AOD and QA grids are not join-compatible")
    mean, std, n, nmed, nbest = window_stats(
        aod.values, qa.condition_medium(), qa.condition_best(), window)
    area = float(window * window)
    valid = n > min_valid_pixels
    valid &= ~(std > std_threshold)
    return WindowGrid(mean, std, n, nmed / area, nbest / area, valid)


def extract_aod_window(aod: Raster, qa: QaRaster, center, window=3,
                       min_valid_pixels=3, std_threshold=0.5) -> WindowExtract:
    r, c = center
    if not (0 <= r < aod.spec.n_rows and 0 <= c < aod.spec.n_cols):
        raise IndexError(f"window center {center} lies outside the grid")
    half = window // 2
    r0, r1 = max(r - half, 0), min(r + half + 1, aod.spec.n_rows)
    c0, c1 = max(c - half, 0), min(c + half + 1, aod.spec.n_cols)
    # pad the clipped block back to full size so the center lands mid-window
    block = np.full((window, window), np.nan)
    med = np.zeros((window, window), dtype=bool)
    best = np.zeros((window, window), dtype=bool)
    br, bc = r0 - (r - half), c0 - (c - half)
    sl = (slice(br, br + r1 - r0), slice(bc, bc + c1 - c0))
    block[sl] = aod.values[r0:r1, c0:c1]
    med[sl] = qa.condition_medium()[r0:r1, c0:c1]
    best[sl] = qa.condition_best()[r0:r1, c0:c1]
    mean, std, n, nmed, nbest = window_stats(block, med, best, window)
    k = half
    area = float(window * window)
    n0 = int(n[k, k])
    valid = n0 > min_valid_pixels and not (std[k, k] > std_threshold)
    return WindowExtract(float(mean[k, k]), n0, float(std[k, k]),
                         nmed[k, k] / area, nbest[k, k] / area, bool(valid))


def normalize_aod(aod, pblh):
    """Surface-level proxy ``AOD / PBLH`` (per metre)."""
    pblh = np.asarray(pblh, dtype=np.float64)
    if np.any(~(pblh > 0)):
        raise DomainError("boundary layer height must be positive")
    out = np.asarray(aod, dtype=np.float64) / pblh
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AffineMap:
    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * x + self.intercept


@dataclass(frozen=True)
class SensorMaps:
    terra_to_aqua: AffineMap
    aqua_to_terra: AffineMap
    r2: float
    n: int


@dataclass(frozen=True)
class MergeCoefficients:
    seasonal: dict
    pooled: SensorMaps
    mode: str = "seasonal"

    def maps_for(self, season: Season) -> SensorMaps:
        if self.mode == "pooled":
            return self.pooled
        try:
            return self.seasonal[season]
        except KeyError:
            raise ValueError(f"no merge coefficients fitted for the {season.value} season") from None

    def to_dict(self) -> dict:
        def enc(m: SensorMaps):
            return {"terra_to_aqua": [m.terra_to_aqua.slope, m.terra_to_aqua.intercept],
                    "aqua_to_terra": [m.aqua_to_terra.slope, m.aqua_to_terra.intercept],
                    "r2": m.r2, "n": m.n}
        return {"mode": self.mode, "pooled": enc(self.pooled),
                "seasonal": {s.value: enc(m) for s, m in self.seasonal.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> MergeCoefficients:
        def dec(m):
            return SensorMaps(AffineMap(*m["terra_to_aqua"]), AffineMap(*m["aqua_to_terra"]),
                              m["r2"], m["n"])
        return cls({Season(k): dec(v) for k, v in d["seasonal"].items()},
                   dec(d["pooled"]), d.get("mode", "seasonal"))


# Published Aqua/Terra regressions over Tehran, 2013-2019, in MAIAC scaled
# integer units (AOD x 1000). Slopes are unit-free; intercepts scale by 1e-3
# into physical AOD.
TEHRAN_SCALED_REFERENCE = MergeCoefficients(
    seasonal={
        Season.COLD: SensorMaps(AffineMap(0.83, 21.06), AffineMap(0.88, 15.47), 0.73, 0),
        Season.WARM: SensorMaps(AffineMap(0.81, 15.81), AffineMap(0.81, 49.94), 0.65, 0),
    },
    pooled=SensorMaps(AffineMap(0.79, 23.39), AffineMap(0.91, 21.89), 0.72, 0),
)


def rescale(coeffs: MergeCoefficients, factor: float) -> MergeCoefficients:
    """Change AOD units: intercepts multiply by ``factor``, slopes are unchanged."""
    def rs(m: SensorMaps):
        return SensorMaps(AffineMap(m.terra_to_aqua.slope, m.terra_to_aqua.intercept * factor),
                          AffineMap(m.aqua_to_terra.slope, m.aqua_to_terra.intercept * factor),
                          m.r2, m.n)
    return MergeCoefficients({s: rs(m) for s, m in coeffs.seasonal.items()},
                             rs(coeffs.pooled), coeffs.mode)


def _ols(x, y) -> AffineMap:
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx <= 0:
        raise ValueError("cannot fit an affine map: all predictor values are identical")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    return AffineMap(float(slope), float(ym - slope * xm))


def _fit_maps(aqua, terra) -> SensorMaps:
    if aqua.size < 2:
        raise ValueError(f"need at least 2 Aqua/Terra pairs, got {aqua.size}")
    t2a = _ols(terra, aqua)
    a2t = _ols(aqua, terra)
    r = np.corrcoef(aqua, terra)[0, 1]
    return SensorMaps(t2a, a2t, float(r * r), int(aqua.size))


def fit_merge_coefficients(pairs, mode="seasonal") -> MergeCoefficients:
    """Least-squares Terra->Aqua and Aqua->Terra maps per season and pooled.

    ``pairs`` is an iterable of ``(aqua, terra, date)`` with both AODs present.
    In seasonal mode each season needs at least two pairs.
    """
    pairs = list(pairs)
    aqua = np.array([p[0] for p in pairs], dtype=np.float64)
    terra = np.array([p[1] for p in pairs], dtype=np.float64)
    warm = np.array([season_of(p[2]) is Season.WARM for p in pairs], dtype=bool)
    return fit_merge_arrays(aqua, terra, warm, mode)


def fit_merge_arrays(aqua, terra, warm, mode="seasonal") -> MergeCoefficients:
    """Array form of :func:`fit_merge_coefficients`; ``warm`` flags warm-season pairs."""
    aqua = np.asarray(aqua, dtype=np.float64)
    terra = np.asarray(terra, dtype=np.float64)
    warm = np.asarray(warm, dtype=bool)
    if np.isnan(aqua).any() or np.isnan(terra).any():
        raise ValueError("merge pairs must have both AODs present")
    if mode not in ("seasonal", "pooled"):
        raise ValueError(f"merge mode must be 'seasonal' or 'pooled', got {mode!r}")
    seasonal = {}
    for season, mask in ((Season.COLD, ~warm), (Season.WARM, warm)):
        if mask.sum() >= 2:
            seasonal[season] = _fit_maps(aqua[mask], terra[mask])
        elif mode == "seasonal":
            raise ValueError(f"need at least 2 Aqua/Terra pairs in the {season.value} season, "
                             f"got {int(mask.sum())}")
    return MergeCoefficients(seasonal, _fit_maps(aqua, terra), mode)


def merge_aqua_terra(aqua, terra, season: Season, coeffs: MergeCoefficients):
    """Daily AOD as the mean of both sensors, imputing a missing one.

    ``None`` or NaN marks a missing retrieval. Returns NaN when both are
    missing.
    """
    a = np.nan if aqua is None else float(aqua)
    t = np.nan if terra is None else float(terra)
    a_ok, t_ok = not math.isnan(a), not math.isnan(t)
    if a_ok and t_ok:
        return (a + t) / 2
    if not a_ok and not t_ok:
        return np.nan
    maps = coeffs.maps_for(season)
    if t_ok:
        return (maps.terra_to_aqua(t) + t) / 2
    return (a + maps.aqua_to_terra(a)) / 2


@dataclass(frozen=True)
class MergeResult:
    aod: np.ndarray
    imputed_aqua: int
    imputed_terra: int


def merge_grids(aqua: np.ndarray, terra: np.ndarray, date: dt.date,
                coeffs: MergeCoefficients) -> MergeResult:
    """Vectorised :func:`merge_aqua_terra` over two co-registered grids."""
    maps = coeffs.maps_for(season_of(date))
    a_ok, t_ok = ~np.isnan(aqua), ~np.isnan(terra)
    a_fill = np.where(a_ok, aqua, maps.terra_to_aqua(terra))
    t_fill = np.where(t_ok, terra, maps.aqua_to_terra(aqua))
    out = (a_fill + t_fill) / 2
    out = np.where(a_ok | t_ok, out, np.nan)
    return MergeResult(out, int(np.sum(~a_ok & t_ok)), int(np.sum(a_ok & ~t_ok)))


def merge_qa(qa_aqua: QaRaster, qa_terra: QaRaster, aqua: np.ndarray,
             terra: np.ndarray) -> QaRaster:
    """Per-pixel QA of the merged product: the better flag among present sensors."""
    a_ok, t_ok = ~np.isnan(aqua), ~np.isnan(terra)
    out = []
    for name in ("cloud", "adjacency", "aod_quality"):
        fa, ft = getattr(qa_aqua, name), getattr(qa_terra, name)
        worst = max(int(fa.max(initial=0)), int(ft.max(initial=0)), 3)
        fa_m = np.where(a_ok, fa, worst)
        ft_m = np.where(t_ok, ft, worst)
        both_missing = ~a_ok & ~t_ok
        # lower codes are better in every mask
        merged = np.minimum(fa_m, ft_m)
        merged = np.where(both_missing, np.minimum(fa, ft), merged)
        out.append(merged)
    return QaRaster(qa_aqua.spec, *out)
