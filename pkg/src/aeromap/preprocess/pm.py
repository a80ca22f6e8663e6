"""Station PM2.5 cleaning: humidity correction and outlier screening."""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    pass


def correct_pm(pm, rh):
    """Humidity-corrected concentration ``pm / (1 - rh/100)``.

    TEOM monitors heat the sample air, so the reported mass is the dry mass;
    dividing by ``1 - RH/100`` restores the ambient value. Works elementwise
    on arrays.
    """
    pm = np.asarray(pm, dtype=np.float64)
    rh = np.asarray(rh, dtype=np.float64)
    if np.any(rh < 0) or np.any(rh >= 100):
        raise DomainError("relative humidity must lie in [0, 100)")
    if np.any(pm < 0):
        raise DomainError("PM concentration must be non-negative")
    out = pm / (1.0 - rh / 100.0)
    return float(out) if out.ndim == 0 else out


def uncorrect_pm(pm_c, rh):
    """Inverse of :func:`correct_pm` (instrument-equivalent dry mass)."""
    rh = np.asarray(rh, dtype=np.float64)
    if np.any(rh < 0) or np.any(rh >= 100):
        raise DomainError("relative humidity must lie in [0, 100)")
    return np.asarray(pm_c, dtype=np.float64) * (1.0 - rh / 100.0)


def outlier_bounds(values, method="IQR") -> tuple[float, float]:
    """Open interval ``(low, high)`` outside which values count as outliers.

    IQR uses linearly interpolated quartiles (numpy's default, "type 7").
    ThreeSigma uses the sample standard deviation.
    """
    v = np.asarray(values, dtype=np.float64)
    if method == "IQR":
        if v.size < 4:
            raise ValueError(f"IQR screening needs at least 4 values, got {v.size}")
        q1, q3 = np.percentile(v, [25, 75])
        iqr = q3 - q1
        return q1 - iqr, q3 + iqr
    if method == "ThreeSigma":
        if v.size < 2:
            raise ValueError(f"3-sigma screening needs at least 2 values, got {v.size}")
        mu, sd = v.mean(), v.std(ddof=1)
        return mu - 3 * sd, mu + 3 * sd
    raise ValueError(f"unknown outlier method {method!r}")


def filter_outliers(values, method="IQR") -> np.ndarray:
    """Indices of the inliers, in ascending order.

    Inliers lie strictly inside the bounds from :func:`outlier_bounds`. When
    the bounds collapse to a single point (zero spread) the values equal to
    that point are kept rather than discarding everything.
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = outlier_bounds(v, method)
    if lo == hi:
        keep = v == lo
    else:
        keep = (v > lo) & (v < hi)
    return np.flatnonzero(keep)
