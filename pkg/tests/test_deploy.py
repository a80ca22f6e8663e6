import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aeromap.datamodel import FEATURES, GridSpec, Raster
from aeromap.deploy import (
    DailyMap,
    Provenance,
    QuasiStation,
    Source,
    aggregate_by_period,
    aggregate_maps,
    classify_aqi_band,
    daily_map,
    fuse_and_interpolate,
    ground_stations,
    predict_grid,
    write_daily_map,
)
from aeromap.geostat import KrigingError, KrigingSystem, fit_kriging
from aeromap.io.grid import read_raster
from aeromap.io.layout import DayInputs
from aeromap.models import fit_model
from aeromap.models.linear import LinearModel
from aeromap.preprocess import build_samples
from aeromap.preprocess.samples import day_windows

SPEC = GridSpec(8, 9, 35.80, 51.20, 0.01)
D = dt.date(2018, 2, 3)


def _q(r, c, v, source=Source.MODEL, spec=SPEC):
    lat, lon = spec.center_of(r, c)
    return QuasiStation(lat, lon, D, v, source)


# fusion


def test_ground_only_constant_field():
    g = [_q(1, 1, 30.0, Source.GROUND), _q(5, 7, 30.0, Source.GROUND), _q(6, 2, 30.0, Source.GROUND)]
    m = fuse_and_interpolate([], g, SPEC, date=D)
    assert (m.pm25.values == 30.0).all() and m.n_quasi == 0 and m.n_ground == 3
    assert m.pm25.spec.timestamp == D


def test_ground_wins_over_colocated_quasi():
    q = [_q(2, 2, 10.0), _q(4, 6, 20.0), _q(7, 1, 15.0)]
    g = [_q(2, 2, 55.0, Source.GROUND), _q(0, 8, 25.0, Source.GROUND)]
    m = fuse_and_interpolate(q, g, SPEC)
    assert m.pm25.values[2, 2] == 55.0
    assert m.provenance.values[2, 2] == Provenance.GROUND
    assert m.n_quasi == 2 and m.n_ground == 2


def test_dense_quasi_cells_keep_model_values():
    rng = np.random.default_rng(0)
    cells = [(r, c) for r in range(SPEC.n_rows) for c in range(SPEC.n_cols) if (r + c) % 3]
    vals = rng.uniform(5, 80, len(cells))
    q = [_q(r, c, v) for (r, c), v in zip(cells, vals)]
    m = fuse_and_interpolate(q, [], SPEC)
    for (r, c), v in zip(cells, vals):
        assert m.pm25.values[r, c] == v
        assert m.provenance.values[r, c] == Provenance.MODEL_DIRECT
    assert not np.isnan(m.pm25.values).any()
    assert (m.provenance.values == Provenance.INTERPOLATED).sum() == SPEC.size - len(cells)


def _ground_field(scale=1.0):
    pts = [(0, 0, 12.0), (1, 5, 30.0), (3, 2, 22.0), (4, 8, 41.0), (6, 4, 18.0), (7, 7, 35.0),
           (2, 7, 27.0), (5, 0, 15.0)]
    return [_q(r, c, scale * v, Source.GROUND) for r, c, v in pts]


def test_zero_quasi_equals_ground_kriging():
    g = _ground_field()
    m = fuse_and_interpolate([], g, SPEC, kriging="ordinary/spherical")
    lat = np.array([s.lat for s in g])
    lon = np.array([s.lon for s in g])
    v = np.array([s.pm25_est for s in g])
    cfg = fit_kriging("ordinary", "spherical", lat, lon, v)
    glat, glon = SPEC.coordinates()
    want, _ = KrigingSystem(cfg, lat, lon, v).predict(glat.ravel(), glon.ravel())
    np.testing.assert_allclose(m.pm25.values, want.reshape(SPEC.shape), rtol=1e-9, atol=1e-9)
    assert m.kriging["setting"] == "ordinary/spherical"


@pytest.mark.parametrize("alpha", [0.5, 3.0, 17.0])
def test_ordinary_kriging_scales_linearly(alpha):
    q = [_q(3, 4, 25.0), _q(0, 3, 33.0)]
    base = fuse_and_interpolate(q, _ground_field(), SPEC, kriging="ordinary/spherical")
    scaled = fuse_and_interpolate([_q(3, 4, alpha * 25.0), _q(0, 3, alpha * 33.0)],
                                  _ground_field(alpha), SPEC, kriging="ordinary/spherical")
    interp = base.provenance.values == Provenance.INTERPOLATED
    np.testing.assert_allclose(scaled.pm25.values[interp], alpha * base.pm25.values[interp],
                               rtol=1e-8)


def test_too_few_points():
    with pytest.raises(KrigingError):
        fuse_and_interpolate([_q(1, 1, 5.0)], [], SPEC)
    with pytest.raises(KrigingError):   # two stations sharing one cell
        fuse_and_interpolate([_q(1, 1, 5.0)], [_q(1, 1, 7.0, Source.GROUND)], SPEC)


def test_two_stations_still_map():
    m = fuse_and_interpolate([_q(0, 0, 10.0)], [_q(7, 8, 20.0, Source.GROUND)], SPEC)
    assert m.kriging["setting"] == "ordinary/linear-unfitted"
    v = m.pm25.values
    assert v[0, 0] == 10.0 and v[7, 8] == 20.0
    assert not np.isnan(v).any() and v.min() >= 10.0 - 1e-9 and v.max() <= 20.0 + 1e-9


def test_quasi_station_rejects_negative():
    with pytest.raises(ValueError):
        QuasiStation(35.8, 51.2, D, -0.1)


def test_ground_stations_snap_and_correct():
    from aeromap.datamodel import StationRecord
    lat, lon = SPEC.center_of(2, 3)
    recs = [StationRecord("A", lat + 0.003, lon - 0.002, D, 40.0),
            StationRecord("B", lat, lon, D, None),
            StationRecord("C", 10.0, 10.0, D, 40.0)]
    rh = np.full(SPEC.shape, 20.0)
    (g,) = ground_stations(recs, SPEC, rh)
    assert (g.lat, g.lon) == (lat, lon) and g.pm25_est == 50.0 and g.source is Source.GROUND


# aggregation and bands


def _raster(v, date=D):
    return Raster(SPEC.with_date(date), np.full(SPEC.shape, float(v)), "pm25")


def test_median_examples():
    one = _raster(7.0)
    assert aggregate_maps([one]).values.tolist() == one.values.tolist()
    assert (aggregate_maps([_raster(10), _raster(20), _raster(90)]).values == 20).all()


@settings(max_examples=40, deadline=None)
@given(st.lists(arrays(np.float64, SPEC.shape, elements=st.floats(0, 500)), min_size=1, max_size=6))
def test_median_bounded_by_inputs(stack):
    out = aggregate_maps([Raster(SPEC, a) for a in stack]).values
    s = np.stack(stack)
    assert (out >= s.min(0)).all() and (out <= s.max(0)).all()


def test_aggregate_by_period():
    prov = Raster(SPEC, np.zeros(SPEC.shape))
    maps = [DailyMap(d, _raster(v, d), prov, 0, 0)
            for d, v in [(dt.date(2018, 1, 5), 1), (dt.date(2018, 1, 9), 3), (dt.date(2018, 2, 1), 8),
                         (dt.date(2019, 2, 1), 4)]]
    months = aggregate_by_period(maps, "Month")
    assert list(months) == ["2018-01", "2018-02", "2019-02"]
    assert (months["2018-01"].values == 2).all()
    years = aggregate_by_period(maps, "Year")
    assert (years["2018"].values == 3).all() and years["2018"].spec.timestamp is None
    with pytest.raises(ValueError):
        aggregate_by_period(maps, "Week")
    with pytest.raises(ValueError):
        aggregate_maps([])


def test_aqi_bands():
    r = Raster(GridSpec(1, 6, 0, 0, 1), [[0, 12.0, 12.1, 35.5, 150.4, 400]], "pm25")
    bands = {"Clean": 12.0, "Moderate": 35.4, "UnhealthySensitive": 55.4, "Unhealthy": 150.4,
             "VeryUnhealthy": None}
    idx, labels = classify_aqi_band(r, bands)
    assert labels == list(bands)
    assert idx.values.tolist() == [[0, 0, 1, 2, 3, 4]]
    idx, labels = classify_aqi_band(r, {"Low": 12.0, "High": 35.4})
    assert labels == ["Low", "High", "Above"] and idx.values[0, -1] == 2


# prediction on the grid


@pytest.fixture(scope="module")
def fitted(small_scene, small_config):
    samples, _, coeffs = build_samples(small_scene.stations, small_scene.days, small_config)
    train = [s for s in samples if s.date < dt.date(2018, 4, 10)]
    X = np.array([[s.features[f] for f in FEATURES] for s in train])
    y = np.array([s.target for s in train])
    model = fit_model("GradientBoosting", X, y, FEATURES, small_config)
    return model, coeffs, samples


def test_fully_missing_day_has_no_quasi_stations(small_scene, small_config, fitted):
    model, coeffs, _ = fitted
    d = small_scene.days[5]
    nan = Raster(d.aod_aqua.spec, np.full(d.aod_aqua.spec.shape, np.nan))
    blank = DayInputs(d.date, nan, nan, d.qa_aqua, d.qa_terra, d.met)
    assert predict_grid(model, blank, coeffs, small_config).quasi == []


def test_quasi_count_equals_valid_windows(small_scene, small_config, fitted):
    model, coeffs, _ = fitted
    day = small_scene.days[12]
    gp = predict_grid(model, day, coeffs, small_config)
    n_valid = int(day_windows(day, coeffs, small_config).window.valid.sum())
    assert n_valid > 0 and len(gp.quasi) == n_valid
    assert all(q.pm25_est >= 0 and q.source is Source.MODEL for q in gp.quasi)


def test_negative_estimates_are_clamped_and_counted(small_scene, small_config, fitted):
    _, coeffs, _ = fitted
    p = len(FEATURES)
    neg = LinearModel("Multivariate", FEATURES, -5.0, np.zeros(p), np.zeros(p), np.ones(p))
    gp = predict_grid(neg, small_scene.days[12], coeffs, small_config)
    assert gp.n_clamped == len(gp.quasi) > 0
    assert all(q.pm25_est == 0.0 for q in gp.quasi)


def test_quasi_stations_match_sample_predictions(small_scene, small_config, fitted):
    """At station cells the grid path and the training-sample path see the same features."""
    model, coeffs, samples = fitted
    spec = small_scene.spec
    where = {r.station_id: spec.cell_of(r.lat, r.lon) for r in small_scene.stations}
    by_day = {}
    for s in samples:
        by_day.setdefault(s.date, []).append(s)
    checked = 0
    for day in small_scene.days[40:]:
        gp = predict_grid(model, day, coeffs, small_config)
        by_cell = {spec.cell_of(q.lat, q.lon): q.pm25_est for q in gp.quasi}
        for s in by_day.get(day.date, []):
            want = max(0.0, float(model.predict_matrix(
                np.array([[s.features[f] for f in FEATURES]]))[0]))
            assert by_cell[where[s.station_id]] == pytest.approx(want, rel=1e-9, abs=1e-9)
            checked += 1
    assert checked > 50


def test_daily_map_is_gap_free_and_written(tmp_path, small_scene, small_config, fitted):
    model, coeffs, _ = fitted
    day = small_scene.days[20]
    recs = [r for r in small_scene.stations if r.date == day.date]
    m, gp = daily_map(model, day, recs, coeffs, small_config)
    assert not np.isnan(m.pm25.values).any() and (m.pm25.values >= 0).all()
    assert m.n_ground == sum(r.pm25 is not None for r in recs)
    pm, prov = write_daily_map(m, tmp_path)
    assert pm.name == f"pm25_{day.date.isoformat()}.grid"
    assert read_raster(prov).values.max() == Provenance.GROUND
    raw, _ = daily_map(model, day, recs, coeffs, small_config.replace(instrument_units=True))
    np.testing.assert_allclose(raw.pm25.values, m.pm25.values * (1 - gp.rh / 100), rtol=1e-12)
