"""Moving-window AOD statistics over a whole grid.

Both backends accumulate in row-major window order, so they agree bit for
bit. Out-of-grid window cells are treated as missing AOD.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from aeromap import _accel


@_accel.njit(cache=True, nogil=True)
def _window_stats_nb(aod, medium, best, half):
    nr, nc = aod.shape
    mean = np.full((nr, nc), np.nan)
    std = np.full((nr, nc), np.nan)
    nvalid = np.zeros((nr, nc), dtype=np.int64)
    nmed = np.zeros((nr, nc), dtype=np.int64)
    nbest = np.zeros((nr, nc), dtype=np.int64)
    for r in range(nr):
        for c in range(nc):
            s = 0.0
            n = 0
            km = 0
            kb = 0
            for i in range(r - half, r + half + 1):
                if i < 0 or i >= nr:
                    continue
                for j in range(c - half, c + half + 1):
                    if j < 0 or j >= nc:
                        continue
                    x = aod[i, j]
                    if x == x:
                        s += x
                        n += 1
                        if medium[i, j]:
                            km += 1
                        if best[i, j]:
                            kb += 1
            nvalid[r, c] = n
            nmed[r, c] = km
            nbest[r, c] = kb
            if n > 0:
                m = s / n
                mean[r, c] = m
                if n > 1:
                    ss = 0.0
                    for i in range(r - half, r + half + 1):
                        if i < 0 or i >= nr:
                            continue
                        for j in range(c - half, c + half + 1):
                            if j < 0 or j >= nc:
                                continue
                            x = aod[i, j]
                            if x == x:
                                ss += (x - m) * (x - m)
                    std[r, c] = np.sqrt(ss / (n - 1))
    return mean, std, nvalid, nmed, nbest


def _window_stats_np(aod, medium, best, half):
    nr, nc = aod.shape
    w = 2 * half + 1
    pad = np.pad(aod, half, constant_values=np.nan)
    win = sliding_window_view(pad, (w, w)).reshape(nr, nc, w * w)
    ok = ~np.isnan(win)
    n = ok.sum(axis=-1)
    # cumulative sums keep the accumulation order sequential
    s = np.nancumsum(win, axis=-1)[..., -1]
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(n > 0, s / np.maximum(n, 1), np.nan)
        dev = np.where(ok, (win - mean[..., None]) * (win - mean[..., None]), 0.0)
        ss = np.cumsum(dev, axis=-1)[..., -1]
        std = np.where(n > 1, np.sqrt(ss / np.maximum(n - 1, 1)), np.nan)
    masks = []
    for flag in (medium, best):
        fpad = np.pad(flag, half, constant_values=False)
        fwin = sliding_window_view(fpad, (w, w)).reshape(nr, nc, w * w)
        masks.append((fwin & ok).sum(axis=-1).astype(np.int64))
    return mean, std, n.astype(np.int64), masks[0], masks[1]


def window_stats(aod, medium, best, window):
    """Per-cell (mean, std, n_valid, n_medium, n_best) over a ``window``-square."""
    half = window // 2
    aod = np.ascontiguousarray(aod, dtype=np.float64)
    medium = np.ascontiguousarray(medium, dtype=np.bool_)
    best = np.ascontiguousarray(best, dtype=np.bool_)
    if _accel.USE_NUMBA:
        return _window_stats_nb(aod, medium, best, half)
    return _window_stats_np(aod, medium, best, half)
