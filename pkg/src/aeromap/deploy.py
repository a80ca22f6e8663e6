"""Deployment: gridded model estimates, fusion with ground stations, and maps.

A fitted model is applied at every cell with a valid AOD window; those cells
become quasi-stations. Quasi-stations and ground stations are kriged onto
the full grid so every daily map is gap-free. Cells hosting a station keep
its value: ground readings take precedence over model estimates.
"""

from __future__ import annotations

import datetime as dt
import enum
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aeromap.datamodel import FEATURES, GridSpec, Raster
from aeromap.geostat.kriging import KrigingConfig, KrigingError, KrigingSystem
from aeromap.geostat.search import fit_kriging
from aeromap.geostat.variogram import VariogramFitError, VariogramModel
from aeromap.io.grid import write_raster
from aeromap.preprocess.pm import correct_pm, uncorrect_pm
from aeromap.preprocess.samples import (
    FALLBACK_KRIGING,
    MetInterpolation,
    day_windows,
    feature_rows,
    krige_met,
)


class Source(enum.Enum):
    MODEL = "Model"
    GROUND = "Ground"


class Provenance(enum.IntEnum):
    """Per-cell origin of a daily map value."""

    MODEL_DIRECT = 0
    INTERPOLATED = 1
    GROUND = 2


@dataclass(frozen=True)
class QuasiStation:
    lat: float
    lon: float
    date: dt.date
    pm25_est: float
    source: Source = Source.MODEL

    def __post_init__(self):
        if not self.pm25_est >= 0:
            raise ValueError(f"station estimate must be non-negative, got {self.pm25_est}")


@dataclass
class GridPrediction:
    """Model estimates for one day plus what is needed to fuse them."""

    date: dt.date
    spec: GridSpec
    quasi: list
    n_clamped: int
    met: MetInterpolation
    rh: np.ndarray


def predict_grid(model, day, coeffs, config) -> GridPrediction:
    """Quasi-stations at every cell whose AOD window is valid.

    Meteorological predictors are kriged to every cell center once per
    variable (also giving the humidity field used to correct ground
    readings). Negative estimates are clamped to zero and counted.
    """
    from aeromap.models import predict

    spec = day.aod_aqua.spec
    glat, glon = spec.coordinates()
    lat, lon = glat.ravel(), glon.ravel()
    met = krige_met(day.met, lat, lon, config.kriging, config.kriging_n_bins)
    rh = met.values["RH"].reshape(spec.shape)
    feats = day_windows(day, coeffs, config)
    w = feats.window
    valid = w.valid.ravel()
    table = feature_rows(day.date, lat, lon, w.aod_mean.ravel(), w.prob_best.ravel(),
                         w.prob_med.ravel(), met.values)
    ok = valid & np.all([np.isfinite(table[f]) for f in FEATURES], axis=0)
    quasi, n_clamped = [], 0
    if ok.any():
        est = predict(model, {f: table[f][ok] for f in FEATURES})
        neg = est < 0
        n_clamped = int(neg.sum())
        if config.clamp_negative:
            est = np.where(neg, 0.0, est)
        quasi = [QuasiStation(float(a), float(b), day.date, float(v))
                 for a, b, v in zip(lat[ok], lon[ok], est)]
    return GridPrediction(day.date, spec, quasi, n_clamped, met, rh)


def ground_stations(records, spec: GridSpec, rh=None) -> list:
    """Ground readings as stations at their cell centers.

    With a humidity grid ``rh`` the readings are humidity-corrected so they
    share the model's units. Missing readings and off-grid stations are
    skipped.
    """
    out = []
    for r in records:
        if r.pm25 is None:
            continue
        cell = spec.cell_of(r.lat, r.lon)
        if cell is None:
            continue
        value = r.pm25 if rh is None else float(correct_pm(r.pm25, rh[cell]))
        lat, lon = spec.center_of(*cell)
        out.append(QuasiStation(lat, lon, r.date, value, Source.GROUND))
    return out


@dataclass(frozen=True)
class DailyMap:
    date: dt.date
    pm25: Raster
    provenance: Raster
    n_quasi: int
    n_ground: int
    kriging: dict = field(default_factory=dict)


def _by_cell(stations, spec):
    cells = {}
    for s in stations:
        cell = spec.cell_of(s.lat, s.lon)
        if cell is not None:
            cells.setdefault(cell, []).append(s.pm25_est)
    return {c: float(np.mean(v)) for c, v in cells.items()}


def fuse_and_interpolate(quasi, ground, spec: GridSpec, kriging="ordinary/spherical",
                         n_bins=12, date=None) -> DailyMap:
    """Krige quasi and ground stations onto every cell of ``spec``.

    ``ground`` holds :class:`QuasiStation` objects with ``Source.GROUND``
    (see :func:`ground_stations`). A ground station replaces any quasi-station
    in its cell. Cells hosting a station keep the station value. When the
    configured kriging cannot be fitted, ``ordinary/linear`` is tried, and
    when too few station pairs exist to fit any variogram, ordinary kriging
    with a unit-slope linear variogram is used (with no nugget the ordinary
    kriging weights do not depend on the slope).

    Raises
    ------
    KrigingError
        Fewer than two distinct station cells, or no kriging setting solves.
    """
    q = _by_cell(quasi, spec)
    g = _by_cell(ground, spec)
    for cell in g:
        q.pop(cell, None)
    pts = sorted({**q, **g}.items())
    if len(pts) < 2:
        raise KrigingError(f"need at least 2 distinct station locations to map, got {len(pts)}")
    rows = np.array([c.row for c, _ in pts])
    cols = np.array([c.col for c, _ in pts])
    vals = np.array([v for _, v in pts])
    slat, slon = spec.center_of(rows, cols)
    glat, glon = spec.coordinates()
    if vals.min() == vals.max():
        surface = np.full(spec.shape, vals[0])
        used = {"setting": "constant"}
    else:
        for setting in dict.fromkeys((kriging, FALLBACK_KRIGING)):
            kind, _, family = setting.partition("/")
            try:
                cfg = fit_kriging(kind, family, slat, slon, vals, n_bins)
                pred, _ = KrigingSystem(cfg, slat, slon, vals).predict(glat.ravel(), glon.ravel())
            except (KrigingError, VariogramFitError, ValueError, np.linalg.LinAlgError):
                continue
            surface = pred.reshape(spec.shape)
            used = {"setting": setting, "config": cfg.to_dict()}
            break
        else:
            cfg = KrigingConfig("ordinary", VariogramModel("linear", scale=1.0))
            try:
                pred, _ = KrigingSystem(cfg, slat, slon, vals).predict(glat.ravel(), glon.ravel())
            except (KrigingError, ValueError, np.linalg.LinAlgError) as exc:
                raise KrigingError("no kriging setting could interpolate the stations") from exc
            surface = pred.reshape(spec.shape)
            used = {"setting": "ordinary/linear-unfitted", "config": cfg.to_dict()}
    surface = np.array(surface, dtype=np.float64)
    prov = np.full(spec.shape, int(Provenance.INTERPOLATED), dtype=np.float64)
    for (cell, v) in q.items():
        surface[cell] = v
        prov[cell] = Provenance.MODEL_DIRECT
    for (cell, v) in g.items():
        surface[cell] = v
        prov[cell] = Provenance.GROUND
    spec = spec.with_date(date)
    return DailyMap(date, Raster(spec, surface, "pm25"), Raster(spec, prov, "provenance"),
                    len(q), len(g), used)


def daily_map(model, day, records, coeffs, config) -> tuple[DailyMap, GridPrediction]:
    """Predict, fuse and interpolate one day; the map is in corrected units
    unless ``config.instrument_units`` asks for the instrument-equivalent."""
    gp = predict_grid(model, day, coeffs, config)
    ground = ground_stations(records, gp.spec, gp.rh)
    m = fuse_and_interpolate(gp.quasi, ground, gp.spec, config.map_kriging,
                             config.kriging_n_bins, day.date)
    if config.instrument_units:
        raw = uncorrect_pm(m.pm25.values, gp.rh)
        m = DailyMap(m.date, Raster(m.pm25.spec, raw, "pm25"), m.provenance,
                     m.n_quasi, m.n_ground, m.kriging)
    return m, gp


PERIODS = ("Month", "Year")


def period_key(date: dt.date, period: str) -> str:
    if period == "Month":
        return f"{date.year:04d}-{date.month:02d}"
    if period == "Year":
        return f"{date.year:04d}"
    raise ValueError(f"period must be one of {PERIODS}, got {period!r}")


def aggregate_maps(maps) -> Raster:
    """Per-cell median of daily maps (``DailyMap`` or ``Raster``)."""
    rasters = [m.pm25 if isinstance(m, DailyMap) else m for m in maps]
    if not rasters:
        raise ValueError("need at least one daily map to aggregate")
    spec = rasters[0].spec
    if not all(spec.compatible(r.spec) for r in rasters[1:]):
        raise ValueError("daily maps are not on the same grid")
    stack = np.stack([r.values for r in rasters])
    return Raster(spec.with_date(None), np.median(stack, axis=0), "pm25")


def aggregate_by_period(maps, period: str) -> dict:
    """Median maps keyed by ``YYYY-MM`` (Month) or ``YYYY`` (Year)."""
    groups = defaultdict(list)
    for m in maps:
        groups[period_key(m.date, period)].append(m)
    return {k: aggregate_maps(v) for k, v in sorted(groups.items())}


def classify_aqi_band(pm25, thresholds) -> tuple[Raster, list]:
    """Band index per cell and the band labels.

    ``thresholds`` maps band label to its inclusive upper bound, with
    ``None`` for the open-ended top band. Bands are ordered by bound.
    """
    r = pm25.pm25 if isinstance(pm25, DailyMap) else pm25
    items = sorted(thresholds.items(), key=lambda kv: np.inf if kv[1] is None else kv[1])
    labels = [k for k, _ in items]
    bounds = [np.inf if b is None else float(b) for _, b in items]
    if bounds[-1] != np.inf:
        labels.append("Above")
        bounds.append(np.inf)
    idx = np.searchsorted(np.array(bounds), r.values, side="left").astype(np.float64)
    idx[np.isnan(r.values)] = np.nan
    return Raster(r.spec, idx, "aqi_band"), labels


def map_paths(out_dir, date: dt.date) -> tuple[Path, Path]:
    d = Path(out_dir)
    return d / f"pm25_{date.isoformat()}.grid", d / f"provenance_{date.isoformat()}.grid"


def write_daily_map(m: DailyMap, out_dir) -> tuple[Path, Path]:
    pm_path, prov_path = map_paths(out_dir, m.date)
    pm_path.parent.mkdir(parents=True, exist_ok=True)
    write_raster(m.pm25, pm_path)
    write_raster(m.provenance, prov_path)
    return pm_path, prov_path
