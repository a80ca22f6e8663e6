"""Derived meteorological predictors."""

from __future__ import annotations

import numpy as np

RH_MAX = 99.9

# Magnus coefficients over water (Alduchov & Eskridge 1996), temperatures in °C.
_MAGNUS_A = 17.625
_MAGNUS_B = 243.04


def wind_speed(u10, v10):
    return np.hypot(u10, v10)


def wind_direction(u10, v10):
    """Direction the wind blows *from*, degrees clockwise from north, in [0, 360)."""
    d = np.degrees(np.arctan2(-np.asarray(u10, dtype=float), -np.asarray(v10, dtype=float)))
    d = np.mod(d, 360.0)
    return np.where(d >= 360.0, 0.0, d) + 0.0


def relative_humidity(d2m, t2m):
    """RH in percent from 2 m dewpoint and air temperature (both kelvin).

    Clamped to ``[0, 99.9]`` so the humidity correction stays finite.
    """
    td = np.asarray(d2m, dtype=float) - 273.15
    t = np.asarray(t2m, dtype=float) - 273.15
    ratio = np.exp(_MAGNUS_A * td / (_MAGNUS_B + td) - _MAGNUS_A * t / (_MAGNUS_B + t))
    return np.clip(100.0 * ratio, 0.0, RH_MAX)


def derive_meteo_features(u10, v10, d2m, t2m) -> dict:
    """``ws10``, ``wd10`` and ``RH`` from raw reanalysis fields (scalars or arrays)."""
    out = {
        "ws10": wind_speed(u10, v10),
        "wd10": wind_direction(u10, v10),
        "RH": relative_humidity(d2m, t2m),
    }
    if np.ndim(u10) == 0 and np.ndim(d2m) == 0:
        out = {k: float(v) for k, v in out.items()}
    return out
