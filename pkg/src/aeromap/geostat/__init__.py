"""Variograms, ordinary/universal kriging and CV grid search."""

from aeromap.geostat.kriging import (
    KrigingConfig,
    KrigingError,
    KrigingResult,
    KrigingSystem,
    krige,
    krige_arrays,
)
from aeromap.geostat.projection import LocalProjection, equirectangular_distance
from aeromap.geostat.search import CvCell, fit_kriging, grid_search_kriging
from aeromap.geostat.variogram import (
    FAMILIES,
    VariogramFitError,
    VariogramModel,
    empirical_variogram,
    fit_variogram,
)

__all__ = [
    "FAMILIES",
    "CvCell",
    "KrigingConfig",
    "KrigingError",
    "KrigingResult",
    "KrigingSystem",
    "LocalProjection",
    "VariogramFitError",
    "VariogramModel",
    "empirical_variogram",
    "equirectangular_distance",
    "fit_kriging",
    "fit_variogram",
    "grid_search_kriging",
    "krige",
    "krige_arrays",
]
