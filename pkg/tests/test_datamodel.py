import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aeromap.datamodel import (
    FEATURES,
    Cell,
    GridSpec,
    QaRaster,
    Raster,
    Sample,
    Season,
    StationRecord,
    feature_matrix,
    season_of,
)


@pytest.mark.parametrize("date,season", [
    (dt.date(2018, 1, 1), Season.COLD),
    (dt.date(2018, 4, 1), Season.WARM),
    (dt.date(2018, 9, 30), Season.WARM),
    (dt.date(2018, 10, 1), Season.COLD),
    (dt.date(2018, 3, 31), Season.COLD),
])
def test_season_examples(date, season):
    assert season_of(date) is season


def test_every_month_has_exactly_one_season():
    warm = {m for m in range(1, 13) if season_of(dt.date(2020, m, 1)) is Season.WARM}
    assert warm == set(range(4, 10))


SPEC = GridSpec(5, 7, 35.8, 51.2, 0.01)


def test_cell_of_origin():
    assert SPEC.cell_of(35.8, 51.2) == Cell(0, 0)


def test_cell_of_south_axis():
    assert SPEC.cell_of(35.8 - 2 * 0.01, 51.2) == Cell(2, 0)


@pytest.mark.parametrize("lat,lon", [
    (35.8 + 0.006, 51.2),          # past the north edge of row 0
    (35.8, 51.2 - 0.006),          # past the west edge of col 0
    (35.8 - 4 * 0.01 - 0.006, 51.2),
    (35.8, 51.2 + 6 * 0.01 + 0.006),
    (36.5, 52.0),
])
def test_cell_of_out_of_bounds(lat, lon):
    assert SPEC.cell_of(lat, lon) is None


@given(st.integers(0, 4), st.integers(0, 6))
def test_cell_center_round_trip(r, c):
    assert SPEC.cell_of(*SPEC.center_of(r, c)) == (r, c)


specs = st.builds(GridSpec, st.integers(1, 3), st.integers(1, 3), st.sampled_from([35.0, 35.5]),
                  st.sampled_from([51.0, 51.5]), st.sampled_from([0.01, 0.02]))


@given(specs, specs, specs)
def test_join_compatibility_is_an_equivalence(a, b, c):
    assert a.compatible(a)
    assert a.compatible(b) == b.compatible(a)
    if a.compatible(b) and b.compatible(c):
        assert a.compatible(c)


def test_compatibility_ignores_timestamp():
    assert SPEC.compatible(SPEC.with_date(dt.date(2018, 1, 1)))
    assert not SPEC.compatible(GridSpec(5, 7, 35.8, 51.2, 0.02))


@pytest.mark.parametrize("args", [(0, 1, 0, 0, 1), (1, 0, 0, 0, 1), (1, 1, 0, 0, 0), (1, 1, 0, 0, -1)])
def test_gridspec_rejects_bad_shapes(args):
    with pytest.raises(ValueError):
        GridSpec(*args)


def test_raster_invariants():
    spec = GridSpec(2, 2, 0, 0, 1)
    r = Raster(spec, [1, np.nan, 3, 4])
    assert r.values.shape == (2, 2) and r.missing.sum() == 1
    with pytest.raises(ValueError):
        r.values[0, 0] = 5
    with pytest.raises(ValueError):
        Raster(spec, [1, 2, 3])
    with pytest.raises(ValueError):
        Raster(spec, [1, 2, 3, np.inf])


def test_qa_conditions():
    spec = GridSpec(1, 4, 0, 0, 1)
    qa = QaRaster(spec, cloud=[0, 1, 0, 2], adjacency=[0, 0, 1, 0], aod_quality=[0, 0, 0, 0])
    assert qa.condition_medium().tolist() == [[True, True, False, False]]
    assert qa.condition_best().tolist() == [[True, False, False, False]]
    missing = QaRaster.all_missing(spec)
    assert not missing.condition_medium().any()


def test_station_record_rejects_negative():
    with pytest.raises(ValueError):
        StationRecord("S", 0, 0, dt.date(2018, 1, 1), -1.0)
    assert StationRecord("S", 0, 0, dt.date(2018, 1, 1), None).pm25 is None


def _features(**over):
    f = {name: 1.0 for name in FEATURES}
    f.update(month=1, DOY=1, RH=50.0)
    f.update(over)
    return f


def test_sample_validation():
    Sample("S", dt.date(2018, 1, 1), _features(), 10.0)
    with pytest.raises(ValueError):
        Sample("S", dt.date(2018, 1, 1), {"AODm": 1.0}, 1.0)
    for bad in ({"month": 13}, {"DOY": 367}, {"RH": 100.0}, {"RH": -1.0}):
        with pytest.raises(ValueError):
            Sample("S", dt.date(2018, 1, 1), _features(**bad), 1.0)


def test_feature_matrix_orders_columns():
    s = [Sample("S", dt.date(2018, 1, 1), _features(AODm=0.3), 5.0)]
    X, y = feature_matrix(s)
    assert X.shape == (1, len(FEATURES)) and X[0, 0] == 0.3 and y[0] == 5.0
