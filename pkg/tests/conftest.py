import datetime as dt

import numpy as np
import pytest

from aeromap.datamodel import GridSpec, QaRaster, Raster
from aeromap.io.config import PipelineConfig
from aeromap.io.synthetic import generate_synthetic_scene

SMALL_SPEC = GridSpec(14, 14, 35.82, 51.17, 0.01)


@pytest.fixture(scope="session")
def small_scene():
    """A quick scene: 14x14 grid, 10 stations, one year thinned to 60 days."""
    return generate_synthetic_scene(SMALL_SPEC, 10, 60, seed=7, start=dt.date(2018, 3, 1))


@pytest.fixture(scope="session")
def small_config():
    return PipelineConfig(rf_n_estimators=20, et_n_estimators=20, gb_n_estimators=40,
                          cv_folds=3, seed=3)


def clear_qa(spec: GridSpec) -> QaRaster:
    z = np.zeros(spec.shape, dtype=np.int8)
    return QaRaster(spec, z, z, z)


def raster(values, spec=None, name="v"):
    values = np.asarray(values, dtype=float)
    spec = spec or GridSpec(values.shape[0], values.shape[1], 35.0, 51.0, 0.01)
    return Raster(spec, values, name)
