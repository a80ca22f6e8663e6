"""Assembly of the model-ready sample table from stations and daily grids."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from aeromap.datamodel import FEATURES, Raster, Sample, Season, season_of
from aeromap.geostat.kriging import KrigingError, KrigingSystem
from aeromap.geostat.search import fit_kriging
from aeromap.geostat.variogram import VariogramFitError
from aeromap.preprocess.aod import extract_windows, fit_merge_arrays, merge_grids, merge_qa
from aeromap.preprocess.meteo import RH_MAX, derive_meteo_features
from aeromap.preprocess.pm import correct_pm, filter_outliers

# Setting tried when the configured kriging for a variable cannot be solved.
FALLBACK_KRIGING = "ordinary/linear"

# Gridded predictors brought to target cells by kriging.
KRIGED_VARS = ("d2m", "t2m", "blh", "lai_hv", "lai_lv", "sp", "ws10", "wd10", "uvb", "cdir", "RH")


def met_predictor_grids(met: dict) -> dict:
    """Add ``ws10``, ``wd10`` and ``RH`` (derived on the meteorological grid)."""
    spec = met["t2m"].spec
    derived = derive_meteo_features(met["u10"].values, met["v10"].values,
                                    met["d2m"].values, met["t2m"].values)
    out = dict(met)
    for name, values in derived.items():
        out[name] = Raster(spec, values, name)
    return out


@dataclass
class MetInterpolation:
    """Kriged predictor values at a set of targets for one day."""

    values: dict
    settings: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)


def krige_met(met: dict, lat, lon, kriging: dict, n_bins=12) -> MetInterpolation:
    """Krige every predictor of :data:`KRIGED_VARS` to ``(lat, lon)`` targets.

    One variogram is fitted per variable from that day's grid and reused for
    all targets. A field with no spatial spread is returned as its constant.
    When the configured setting cannot be fitted or solved the variable is
    retried with :data:`FALLBACK_KRIGING`; if that fails too it yields NaN
    and is listed in ``failures``.
    """
    grids = met_predictor_grids(met)
    lat = np.asarray(lat, dtype=np.float64).ravel()
    lon = np.asarray(lon, dtype=np.float64).ravel()
    out = MetInterpolation({})
    for var in KRIGED_VARS:
        r = grids[var]
        glat, glon = r.spec.coordinates()
        v = r.values.ravel()
        ok = ~np.isnan(v)
        if ok.sum() == 0:
            out.values[var] = np.full(lat.size, np.nan)
            out.failures.append(var)
            continue
        vv = v[ok]
        if vv.min() == vv.max():
            out.values[var] = np.full(lat.size, float(vv[0]))
            out.settings[var] = "constant"
            continue
        slat, slon = glat.ravel()[ok], glon.ravel()[ok]
        for setting in (kriging[var], FALLBACK_KRIGING):
            kind, _, family = setting.partition("/")
            try:
                cfg = fit_kriging(kind, family, slat, slon, vv, n_bins)
                pred, _ = KrigingSystem(cfg, slat, slon, vv).predict(lat, lon)
            except (KrigingError, VariogramFitError, ValueError, np.linalg.LinAlgError):
                continue
            out.values[var] = pred
            out.settings[var] = cfg.to_dict()
            if setting != kriging[var]:
                out.fallbacks.append(var)
            break
        else:
            out.values[var] = np.full(lat.size, np.nan)
            out.failures.append(var)
    out.values["RH"] = np.clip(out.values["RH"], 0.0, RH_MAX)
    return out


def fit_day_merge(days, mode="seasonal"):
    """Aqua/Terra coefficients from every pixel where both sensors retrieved."""
    aqua, terra, warm = [], [], []
    for day in days:
        a = day.aod_aqua.values.ravel()
        t = day.aod_terra.values.ravel()
        both = ~np.isnan(a) & ~np.isnan(t)
        aqua.append(a[both])
        terra.append(t[both])
        warm.append(np.full(int(both.sum()), season_of(day.date) is Season.WARM))
    if not aqua:
        raise ValueError("no days to fit Aqua/Terra coefficients from")
    return fit_merge_arrays(np.concatenate(aqua), np.concatenate(terra),
                            np.concatenate(warm), mode)


@dataclass(frozen=True)
class DayFeatures:
    """Per-cell predictor grids for one day (cells without valid AOD are NaN)."""

    window: object
    merged_aod: np.ndarray
    imputed_aqua: int
    imputed_terra: int


def day_windows(day, coeffs, config) -> DayFeatures:
    merged = merge_grids(day.aod_aqua.values, day.aod_terra.values, day.date, coeffs)
    qa = merge_qa(day.qa_aqua, day.qa_terra, day.aod_aqua.values, day.aod_terra.values)
    aod = Raster(day.aod_aqua.spec, merged.aod, "aod")
    win = extract_windows(aod, qa, config.window_size, config.min_valid_pixels,
                          config.std_threshold)
    return DayFeatures(win, merged.aod, merged.imputed_aqua, merged.imputed_terra)


def feature_rows(date, lat, lon, win_mean, prob_best, prob_med, met_values) -> dict:
    """Feature columns for targets on one date, keyed as in :data:`FEATURES`."""
    blh = met_values["blh"]
    with np.errstate(divide="ignore", invalid="ignore"):
        naod = np.where(blh > 0, win_mean / blh, np.nan)
    n = np.size(lat)
    cols = {
        "AODm": win_mean, "nAODm": naod, "Prob_bestm": prob_best, "Prob_medm": prob_med,
        "lat": lat, "long": lon,
        "month": np.full(n, float(date.month)),
        "DOY": np.full(n, float(date.timetuple().tm_yday)),
    }
    for var in KRIGED_VARS:
        cols[var] = met_values[var]
    return {f: np.asarray(cols[f], dtype=np.float64) for f in FEATURES}


@dataclass
class PreprocessReport:
    counts: dict = field(default_factory=lambda: defaultdict(int))
    outliers_by_station: dict = field(default_factory=dict)
    imputed: dict = field(default_factory=dict)
    skipped_dates: list = field(default_factory=list)
    kriging_failures: dict = field(default_factory=dict)
    kriging_fallbacks: dict = field(default_factory=dict)
    merge: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())),
                "outliers_by_station": dict(sorted(self.outliers_by_station.items())),
                "imputed_aod": self.imputed,
                "skipped_dates": self.skipped_dates,
                "kriging_failures": dict(sorted(self.kriging_failures.items())),
                "kriging_fallbacks": dict(sorted(self.kriging_fallbacks.items())),
                "merge_coefficients": self.merge}


def screen_stations(records, method):
    """Drop per-station outliers; returns (kept records, dropped count per station)."""
    by_station = defaultdict(list)
    for r in records:
        if r.pm25 is not None:
            by_station[r.station_id].append(r)
    kept, dropped, unscreened = [], {}, 0
    for sid in sorted(by_station):
        recs = by_station[sid]
        if method == "none":
            kept.extend(recs)
            continue
        try:
            idx = filter_outliers([r.pm25 for r in recs], method)
        except ValueError:
            # too few readings to estimate the spread
            kept.extend(recs)
            unscreened += 1
            continue
        kept.extend(recs[i] for i in idx)
        dropped[sid] = len(recs) - idx.size
    return kept, dropped, unscreened


def build_samples(stations, days, config, coeffs=None):
    """Samples for every (station, date) with a reading and a valid AOD window.

    Returns ``(samples, report, coeffs)``. ``coeffs`` are fitted from all
    days when not supplied. Samples are sorted by ``(date, station_id)``.
    """
    report = PreprocessReport()
    c = report.counts
    days = sorted(days, key=lambda d: d.date)
    good_days = []
    for day in days:
        if not day.satellite_compatible():
            report.skipped_dates.append({"date": day.date.isoformat(),
                                         "reason": "satellite grids are not join-compatible"})
        elif not day.met_compatible():
            report.skipped_dates.append({"date": day.date.isoformat(),
                                         "reason": "meteorological grids are not join-compatible"})
        else:
            good_days.append(day)
    c["dates_total"] = len(days)
    c["dates_skipped"] = len(report.skipped_dates)
    if coeffs is None:
        coeffs = fit_day_merge(good_days, config.merge_mode)
    report.merge = coeffs.to_dict()

    c["records"] = len(stations)
    c["missing_pm"] = sum(r.pm25 is None for r in stations)
    kept, dropped, unscreened = screen_stations(stations, config.outlier_method)
    report.outliers_by_station = dropped
    c["outliers_dropped"] = sum(dropped.values())
    c["stations_unscreened"] = unscreened
    by_date = defaultdict(list)
    for r in kept:
        by_date[r.date].append(r)

    imputed = {s.value: {"aqua": 0, "terra": 0} for s in Season}
    samples = []
    day_dates = {d.date for d in good_days}
    c["no_grid_for_date"] = sum(len(v) for d, v in by_date.items() if d not in day_dates)
    for day in good_days:
        recs = by_date.get(day.date, [])
        feats = day_windows(day, coeffs, config)
        season = season_of(day.date).value
        imputed[season]["aqua"] += feats.imputed_aqua
        imputed[season]["terra"] += feats.imputed_terra
        if not recs:
            continue
        spec = day.aod_aqua.spec
        cells, live = [], []
        for r in recs:
            cell = spec.cell_of(r.lat, r.lon)
            if cell is None:
                c["off_grid"] += 1
            elif not feats.window.valid[cell]:
                c["invalid_window"] += 1
            else:
                cells.append(cell)
                live.append(r)
        if not live:
            continue
        rows = np.array([x.row for x in cells])
        cols = np.array([x.col for x in cells])
        lat, lon = spec.center_of(rows, cols)
        met = krige_met(day.met, lat, lon, config.kriging, config.kriging_n_bins)
        if met.failures:
            report.kriging_failures[day.date.isoformat()] = met.failures
        if met.fallbacks:
            report.kriging_fallbacks[day.date.isoformat()] = met.fallbacks
        w = feats.window
        table = feature_rows(day.date, lat, lon, w.aod_mean[rows, cols], w.prob_best[rows, cols],
                             w.prob_med[rows, cols], met.values)
        for i, r in enumerate(live):
            values = {f: float(table[f][i]) for f in FEATURES}
            if not all(math.isfinite(v) for v in values.values()):
                c["missing_feature"] += 1
                continue
            target = float(correct_pm(r.pm25, values["RH"]))
            samples.append(Sample(r.station_id, day.date, values, target))
    report.imputed = imputed
    samples.sort(key=lambda s: (s.date, s.station_id))
    c["samples"] = len(samples)
    return samples, report, coeffs
