"""Synthetic city scenes with a known PM2.5 field.

The scene mimics the inputs of the pipeline: two satellite AOD retrievals
with QA flags on a fine grid, reanalysis-style meteorology on a coarser
grid, and daily station readings. Everything is a pure function of the
grid, station count, day count, seed and the generator parameters.

Latent surface PM2.5 (humidity-corrected, µg/m³) at each fine cell is::

    s   = aod / (blh / 1000)                        # AOD per km of mixing height
    pm  = 8 + 55 * s / (1 + 0.3 * s)                # saturating column-to-surface response
        + 16 * sig((550 - blh) / 60)                # shallow-mixing episodes
        + 18 * sig((600 - blh) / 70) * sig((aod - 0.3) / 0.04)   # stagnation under haze
        + 0.2 * (RH - 50) - 3.5 * (ws10 - 2)       # hygroscopic growth, ventilation
        + 20 * hotspot(lat, lon) + residual_day(lat, lon)
    pm  = softplus(pm - 1) + 1                      # strictly positive

where ``sig`` is the logistic function, ``hotspot`` a fixed Gaussian bump
and ``residual_day`` a small daily Gaussian random field. A station reading
is ``(pm + noise) * (1 - RH / 100)`` at its cell, the inverse of the
humidity correction.

Satellite retrievals share a per-pixel error ``c`` (both sensors see the
same surface) and carry their own noise. With seasonal coefficients
``alpha, beta``::

    terra = (2 * (aod + c) - beta) / (1 + alpha) + e_terra
    aqua  = alpha * (terra - e_terra) + beta + e_aqua

so the noiseless merged product ``(aqua + terra) / 2`` equals ``aod + c``
and ``aqua`` is an affine map of ``terra`` plus noise.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from aeromap.datamodel import (
    Adjacency,
    AodQuality,
    Cloud,
    GridSpec,
    QaRaster,
    Raster,
    Season,
    StationRecord,
    season_of,
)
from aeromap.io.grid import atomic_write_text, write_raster
from aeromap.io.layout import MET_RAW, STATIONS_FILE, DayInputs, write_day
from aeromap.io.stations import write_stations
from aeromap.preprocess.meteo import relative_humidity

TRUTH_DIR = "truth"
SCENE_FILE = "scene.json"

# Seasonal Terra->Aqua maps in physical AOD units.
MERGE_TRUTH = {Season.COLD: (0.83, 0.02106), Season.WARM: (0.81, 0.01581)}


@dataclass(frozen=True)
class SceneParams:
    cloud_fraction: float = 0.35
    noise_sd: float = 2.5
    missing_pm_fraction: float = 0.04
    spike_fraction: float = 0.004
    shared_aod_error: float = 0.04
    terra_noise: float = 0.012
    aqua_noise: float = 0.045
    met_cell_size: float = 0.05


@dataclass
class SyntheticScene:
    spec: GridSpec
    met_spec: GridSpec
    days: list
    stations: list
    sites: list
    truth_pm: np.ndarray
    truth_aod: np.ndarray
    truth_rh: np.ndarray
    params: SceneParams = field(default_factory=SceneParams)
    seed: int = 0

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.days]

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "grid": _spec_dict(self.spec),
            "met_grid": _spec_dict(self.met_spec),
            "n_days": len(self.days),
            "start_date": self.days[0].date.isoformat() if self.days else None,
            "sites": [{"station_id": s, "lat": la, "lon": lo} for s, la, lo in self.sites],
            "params": self.params.__dict__,
            "merge_truth": {s.value: {"slope": a, "intercept": b}
                            for s, (a, b) in MERGE_TRUTH.items()},
        }


def _spec_dict(spec: GridSpec) -> dict:
    return {"n_rows": spec.n_rows, "n_cols": spec.n_cols, "origin_lat": spec.origin_lat,
            "origin_lon": spec.origin_lon, "cell_size": spec.cell_size}


def _matern32_factor(lat, lon, corr_range, jitter=1e-8):
    """Cholesky factor of a Matérn-3/2 correlation over the points (degrees)."""
    d = np.hypot(lat[:, None] - lat[None, :], (lon[:, None] - lon[None, :]) * math.cos(
        math.radians(float(lat.mean()))))
    a = math.sqrt(3.0) * d / corr_range
    C = (1.0 + a) * np.exp(-a)
    C[np.diag_indices_from(C)] += jitter
    return np.linalg.cholesky(C)


def _ar1(rng, n, phi):
    z = rng.standard_normal(n)
    out = np.empty(n)
    out[0] = z[0]
    k = math.sqrt(1 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + k * z[i]
    return out


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class _Weather:
    """Smooth analytic meteorology, evaluated at any (lat, lon) for a day index."""

    def __init__(self, rng, dates, lat_c, lon_c, half_extent):
        n = len(dates)
        doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
        # +1 in mid July, -1 in mid January
        self.season = np.cos(2 * np.pi * (doy - 200.0) / 365.25)
        self.w_blh = _ar1(rng, n, 0.5)
        self.w_t = _ar1(rng, n, 0.8)
        self.w_dd = _ar1(rng, n, 0.6)
        self.w_sp = _ar1(rng, n, 0.7)
        self.w_u = _ar1(rng, n, 0.4)
        self.w_v = _ar1(rng, n, 0.4)
        self.phase = rng.uniform(0, 2 * np.pi, n)
        self.phase2 = rng.uniform(0, 2 * np.pi, n)
        self.cloudiness = np.clip(0.5 + 0.25 * _ar1(rng, n, 0.5), 0.0, 1.0)
        self.lat_c, self.lon_c, self.h = lat_c, lon_c, half_extent

    def _xy(self, lat, lon):
        return (lon - self.lon_c) / self.h, (lat - self.lat_c) / self.h

    def fields(self, k, lat, lon) -> dict:
        x, y = self._xy(lat, lon)
        s = self.season[k]
        wt = self.w_t[k]
        # two smooth daily undulations on top of the large-scale gradients
        wave = np.sin(1.5 * x + self.phase[k]) * np.cos(0.8 * y)
        wave2 = np.cos(1.2 * y - 0.7 * x + self.phase2[k])
        t2m = 288.0 + 11.0 * s + 2.5 * wt - 1.5 * y + 0.4 * x + 0.8 * wave2
        blh = 850.0 * np.exp(0.45 * s + 0.45 * self.w_blh[k] + 0.12 * wt
                             - 0.10 * y + 0.08 * wave)
        dd = np.maximum(9.0 + 5.0 * s + 2.5 * self.w_dd[k] + 0.8 * y + 0.3 * x + 0.7 * wave, 0.3)
        green = 0.5 * (1.0 + s)
        static = np.sin(2.2 * x + 0.5) * np.cos(1.6 * y - 0.3)
        sky = 1.0 - 0.3 * self.cloudiness[k] * (1.0 + 0.3 * wave2)
        return {
            "u10": 1.5 + 1.8 * self.w_u[k] + 0.5 * y + 0.5 * wave,
            "v10": -0.5 + 1.8 * self.w_v[k] + 0.3 * x + 0.5 * wave2,
            "d2m": t2m - dd,
            "t2m": t2m,
            "blh": blh,
            "sp": 87500.0 - 2500.0 * y + 30.0 * x + 250.0 * self.w_sp[k] + 120.0 * static,
            "lai_hv": 1.2 + 0.8 * green + 0.3 * x - 0.2 * y + 0.25 * static,
            "lai_lv": 0.8 + 0.6 * green + 0.2 * y - 0.1 * x - 0.15 * static,
            "cdir": (2.0e7 + 0.8e7 * s) * sky + 1.0e5 * x,
            "uvb": (6.0e5 + 3.0e5 * s) * sky + 1.0e4 * y,
        }


def _cloud_qa(rng, L, shape, fraction):
    """Cloud mask from a thresholded smooth field plus MAIAC-like QA codes."""
    n = shape[0] * shape[1]
    if fraction <= 0:
        cloudy = np.zeros(shape, dtype=bool)
    elif fraction >= 1:
        cloudy = np.ones(shape, dtype=bool)
    else:
        f = (L @ rng.standard_normal(n)).reshape(shape)
        cloudy = f > np.quantile(f, 1.0 - fraction)
    near = binary_dilation(cloudy, structure=np.ones((3, 3), dtype=bool)) & ~cloudy
    u = rng.random((3,) + shape)
    cloud = np.full(shape, Cloud.CLEAR, dtype=np.int8)
    cloud[near & (u[0] < 0.5)] = Cloud.POSSIBLY_CLOUDY
    cloud[cloudy] = Cloud.CLOUDY
    adj = np.full(shape, Adjacency.NORMAL_CLEAR, dtype=np.int8)
    adj[near] = Adjacency.ADJACENT
    adj[cloudy] = Adjacency.MISSING
    qual = np.where(u[1] < 0.75, AodQuality.BEST, AodQuality.MEDIUM).astype(np.int8)
    qual[(u[2] < 0.05) & ~cloudy] = AodQuality.LOW
    qual[near & (qual == AodQuality.BEST) & (u[2] < 0.5)] = AodQuality.MEDIUM
    qual[cloudy] = AodQuality.MISSING
    return cloudy, cloud, adj, qual


def generate_synthetic_scene(spec: GridSpec, n_stations: int, n_days: int, seed=0,
                             start=dt.date(2018, 1, 1), params: SceneParams | None = None
                             ) -> SyntheticScene:
    """Deterministic synthetic scene; see the module docstring for the model."""
    if n_stations < 2:
        raise ValueError("a scene needs at least 2 stations")
    if n_days < 1:
        raise ValueError("a scene needs at least 1 day")
    p = params or SceneParams()
    spec = spec.with_date(None)
    ss = np.random.SeedSequence(seed)
    r_site, r_met, r_aod, r_cloud, r_pm, r_sensor = (np.random.default_rng(s) for s in ss.spawn(6))
    dates = [start + dt.timedelta(days=k) for k in range(n_days)]
    shape = spec.shape
    lat, lon = spec.coordinates()
    lat_f, lon_f = lat.ravel(), lon.ravel()
    lat_c = spec.origin_lat - 0.5 * (spec.n_rows - 1) * spec.cell_size
    lon_c = spec.origin_lon + 0.5 * (spec.n_cols - 1) * spec.cell_size
    half = 0.5 * max(spec.n_rows, spec.n_cols) * spec.cell_size

    # coarse meteorological grid covering the fine grid with a one-cell margin
    mc = p.met_cell_size
    m_rows = int(math.ceil((spec.n_rows - 1) * spec.cell_size / mc)) + 3
    m_cols = int(math.ceil((spec.n_cols - 1) * spec.cell_size / mc)) + 3
    met_spec = GridSpec(m_rows, m_cols, round(spec.origin_lat + mc, 10),
                        round(spec.origin_lon - mc, 10), mc)
    mlat, mlon = met_spec.coordinates()

    # stations on distinct interior cells, jittered inside the cell
    rows, cols = np.indices(shape)
    interior = ((rows > 0) & (rows < shape[0] - 1) & (cols > 0) & (cols < shape[1] - 1)).ravel()
    pool = np.flatnonzero(interior) if interior.sum() >= n_stations else np.arange(spec.size)
    if pool.size < n_stations:
        raise ValueError(f"grid has {pool.size} cells for {n_stations} stations")
    picks = np.sort(r_site.choice(pool, n_stations, replace=False))
    jit = r_site.uniform(-0.4, 0.4, (n_stations, 2)) * spec.cell_size
    sites = [(f"S{i + 1:02d}", round(float(lat_f[c] + jit[i, 0]), 6),
              round(float(lon_f[c] + jit[i, 1]), 6)) for i, c in enumerate(picks)]

    weather = _Weather(r_met, dates, lat_c, lon_c, half)

    # AOD: regional daily level times a static and a daily lognormal pattern
    L_aod = _matern32_factor(lat_f, lon_f, 0.10)
    L_cloud = _matern32_factor(lat_f, lon_f, 0.06)
    static = 0.25 * (L_aod @ r_aod.standard_normal(spec.size))
    level = 0.28 * np.exp(0.25 * weather.season + 0.35 * _ar1(r_aod, n_days, 0.7))
    hotspot = np.exp(-((lat_f - (lat_c - 0.02)) ** 2 + (lon_f - (lon_c + 0.03)) ** 2)
                     / (2 * 0.07 ** 2))

    truth_pm = np.empty((n_days,) + shape)
    truth_aod = np.empty((n_days,) + shape)
    truth_rh = np.empty((n_days,) + shape)
    days, records = [], []
    mean_cloud = p.cloud_fraction
    for k, date in enumerate(dates):
        tau = level[k] * np.exp(static + 0.15 * (L_aod @ r_aod.standard_normal(spec.size)))
        met_f = weather.fields(k, lat_f, lon_f)
        rh = relative_humidity(met_f["d2m"], met_f["t2m"])
        blh = met_f["blh"]
        s = tau / (blh / 1000.0)
        ws = np.hypot(met_f["u10"], met_f["v10"])
        resid = 1.5 * (L_aod @ r_pm.standard_normal(spec.size))
        pm = (8.0 + 55.0 * s / (1.0 + 0.3 * s)
              + 16.0 * _sig((550.0 - blh) / 60.0)
              + 18.0 * _sig((600.0 - blh) / 70.0) * _sig((tau - 0.3) / 0.04)
              + 0.2 * (rh - 50.0) - 3.5 * (ws - 2.0) + 20.0 * hotspot + resid)
        pm = np.logaddexp(0.0, pm - 1.0) + 1.0
        truth_pm[k] = pm.reshape(shape)
        truth_aod[k] = tau.reshape(shape)
        truth_rh[k] = rh.reshape(shape)

        # satellite retrievals
        alpha, beta = MERGE_TRUTH[season_of(date)]
        c = p.shared_aod_error * r_sensor.standard_normal(spec.size) * np.sqrt(tau / 0.3)
        terra0 = (2.0 * (tau + c) - beta) / (1.0 + alpha)
        terra = terra0 + p.terra_noise * r_sensor.standard_normal(spec.size)
        aqua = alpha * terra0 + beta + p.aqua_noise * r_sensor.standard_normal(spec.size)
        frac_day = mean_cloud * (0.6 + 0.8 * weather.cloudiness[k]) * (1.0 - 0.3 * weather.season[k])
        qas, aods = [], []
        for vals in (aqua, terra):
            f = float(np.clip(frac_day + 0.1 * r_cloud.standard_normal(), 0.0, 1.0)) \
                if mean_cloud > 0 else 0.0
            cloudy, cl, adj, q = _cloud_qa(r_cloud, L_cloud, shape, f)
            v = vals.reshape(shape).copy()
            v[cloudy] = np.nan
            aods.append(v)
            qas.append(QaRaster(spec.with_date(date), cl, adj, q))
        dspec = spec.with_date(date)
        mdspec = met_spec.with_date(date)
        met_c = weather.fields(k, mlat.ravel(), mlon.ravel())
        met = {name: Raster(mdspec, met_c[name], name) for name in MET_RAW}
        days.append(DayInputs(date, Raster(dspec, aods[0], "aod_aqua"),
                              Raster(dspec, aods[1], "aod_terra"), qas[0], qas[1], met))

        # station readings
        noise = p.noise_sd * r_pm.standard_normal(n_stations)
        u = r_pm.random((n_stations, 2))
        spike = 1.0 + r_pm.uniform(2.0, 4.0, n_stations)
        for i, cell in enumerate(picks):
            reading = (pm[cell] + noise[i]) * (1.0 - rh[cell] / 100.0)
            if u[i, 1] < p.spike_fraction:
                reading *= spike[i]
            value = None if u[i, 0] < p.missing_pm_fraction else max(round(float(reading), 3), 0.0)
            sid, slat, slon = sites[i]
            records.append(StationRecord(sid, slat, slon, date, value))

    records.sort(key=lambda r: (r.station_id, r.date))
    return SyntheticScene(spec, met_spec, days, records, sites, truth_pm, truth_aod, truth_rh,
                          p, int(seed))


def write_scene(scene: SyntheticScene, out_dir) -> None:
    """Write the scene as a data directory plus ``truth/`` grids and ``scene.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_stations(scene.stations, out / STATIONS_FILE)
    for k, day in enumerate(scene.days):
        write_day(out, day)
        spec = scene.spec.with_date(day.date)
        tdir = out / TRUTH_DIR / day.date.isoformat()
        write_raster(Raster(spec, scene.truth_pm[k], "pm25_latent"), tdir / "pm25_latent.grid")
        write_raster(Raster(spec, scene.truth_aod[k], "aod_latent"), tdir / "aod_latent.grid")
    atomic_write_text(out / SCENE_FILE, json.dumps(scene.metadata(), indent=2, sort_keys=True) + "\n")


def truth_path(data_dir, date: dt.date, name="pm25_latent") -> Path:
    return Path(data_dir) / TRUTH_DIR / date.isoformat() / f"{name}.grid"
