"""Stage one: station screening, AOD windows and merging, meteorology."""

from aeromap.preprocess.aod import (
    MergeCoefficients,
    WindowExtract,
    extract_aod_window,
    extract_windows,
    fit_merge_arrays,
    fit_merge_coefficients,
    merge_aqua_terra,
    merge_grids,
    normalize_aod,
)
from aeromap.preprocess.meteo import derive_meteo_features
from aeromap.preprocess.pm import DomainError, correct_pm, filter_outliers, uncorrect_pm
from aeromap.preprocess.samples import KRIGED_VARS, PreprocessReport, build_samples, krige_met

__all__ = [
    "KRIGED_VARS",
    "DomainError",
    "MergeCoefficients",
    "PreprocessReport",
    "WindowExtract",
    "build_samples",
    "correct_pm",
    "derive_meteo_features",
    "extract_aod_window",
    "extract_windows",
    "filter_outliers",
    "fit_merge_arrays",
    "fit_merge_coefficients",
    "krige_met",
    "merge_aqua_terra",
    "merge_grids",
    "normalize_aod",
    "uncorrect_pm",
]
