"""Plain-text raster grids.

Layout::

    nrows 2
    ncols 3
    origin_lat 35.8
    origin_lon 51.2
    cell_size 0.01
    date 2018-01-01
    variable aod
    0.1 0.2 NA
    0.4 0.5 0.6

Header keys appear once each, in this order. ``origin_*`` is the center of
the top-left cell; rows run north to south. Values are written with six
significant digits, ``NA`` marks a missing cell, and ``date`` may be ``NA``
for undated grids.
"""

from __future__ import annotations

import datetime as dt
import os
from pathlib import Path

import numpy as np

from aeromap.datamodel import Adjacency, AodQuality, Cloud, GridSpec, QaRaster, Raster

HEADER_KEYS = ("nrows", "ncols", "origin_lat", "origin_lon", "cell_size", "date", "variable")
MISSING_TOKEN = "NA"


class RasterFormatError(ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


def format_value(x: float) -> str:
    if np.isnan(x):
        return MISSING_TOKEN
    return f"{x:.6g}"


def _parse_header(path, lines):
    header = {}
    for i, key in enumerate(HEADER_KEYS):
        if i >= len(lines):
            raise RasterFormatError(path, i + 1, 1, f"missing header key {key!r}")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0].lower() != key:
            raise RasterFormatError(path, i + 1, 1, f"expected '{key} <value>'")
        header[key] = parts[1]
    try:
        nrows, ncols = int(header["nrows"]), int(header["ncols"])
    except ValueError as exc:
        raise RasterFormatError(path, 1, 1, f"bad grid dimensions: {exc}") from None
    try:
        lat0, lon0 = float(header["origin_lat"]), float(header["origin_lon"])
        cell = float(header["cell_size"])
    except ValueError as exc:
        raise RasterFormatError(path, 3, 1, f"bad georeference: {exc}") from None
    date = None
    if header["date"] != MISSING_TOKEN:
        try:
            date = dt.date.fromisoformat(header["date"])
        except ValueError:
            raise RasterFormatError(path, 6, 1, f"bad date {header['date']!r}") from None
    try:
        spec = GridSpec(nrows, ncols, lat0, lon0, cell, date)
    except ValueError as exc:
        raise RasterFormatError(path, 1, 1, str(exc)) from None
    return spec, header["variable"]


def parse_raster(text: str, path="<string>") -> Raster:
    lines = text.splitlines()
    spec, variable = _parse_header(path, lines)
    values = np.empty(spec.size, dtype=np.float64)
    k = 0
    for lineno, line in enumerate(lines[len(HEADER_KEYS):], start=len(HEADER_KEYS) + 1):
        for col, tok in enumerate(line.split(), start=1):
            if k >= spec.size:
                raise RasterFormatError(path, lineno, col,
                                        f"more than {spec.size} values for a "
                                        f"{spec.n_rows}x{spec.n_cols} grid")
            if tok == MISSING_TOKEN:
                values[k] = np.nan
            else:
                try:
                    v = float(tok)
                except ValueError:
                    raise RasterFormatError(path, lineno, col, f"non-numeric token {tok!r}") from None
                if not np.isfinite(v):
                    raise RasterFormatError(path, lineno, col, f"non-finite value {tok!r}")
                values[k] = v
            k += 1
    if k != spec.size:
        raise RasterFormatError(path, len(lines), 1,
                                f"found {k} values, header declares {spec.size}")
    return Raster(spec, values, variable)


def read_raster(path) -> Raster:
    return parse_raster(Path(path).read_text(), path)


def dump_raster(raster: Raster) -> str:
    s = raster.spec
    out = [
        f"nrows {s.n_rows}",
        f"ncols {s.n_cols}",
        f"origin_lat {s.origin_lat!r}",
        f"origin_lon {s.origin_lon!r}",
        f"cell_size {s.cell_size!r}",
        f"date {s.timestamp.isoformat() if s.timestamp else MISSING_TOKEN}",
        f"variable {raster.variable or 'unnamed'}",
    ]
    for row in raster.values:
        out.append(" ".join(format_value(v) for v in row))
    return "\n".join(out) + "\n"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_raster(raster: Raster, path) -> None:
    atomic_write_text(path, dump_raster(raster))


# QA flags travel as one packed integer per pixel:
# bits 0-1 cloud mask, bits 2-3 adjacency mask, bits 4-5 AOD quality.

def qa_to_raster(qa: QaRaster, variable="qa") -> Raster:
    code = (qa.cloud.astype(np.int64)
            | (qa.adjacency.astype(np.int64) << 2)
            | (qa.aod_quality.astype(np.int64) << 4))
    return Raster(qa.spec, code.astype(np.float64), variable)


def qa_from_raster(raster: Raster) -> QaRaster:
    v = raster.values
    if np.isnan(v).any() or (v != np.round(v)).any() or (v < 0).any() or (v > 63).any():
        raise ValueError("QA grid must hold integer codes in [0, 63]")
    code = v.astype(np.int64)
    cloud, adj, qual = code & 3, (code >> 2) & 3, (code >> 4) & 3
    if (adj > Adjacency.MISSING).any():
        raise ValueError("QA adjacency code out of range")
    assert cloud.max(initial=0) <= Cloud.MISSING and qual.max(initial=0) <= AodQuality.MISSING
    return QaRaster(raster.spec, cloud, adj, qual)


def read_qa(path) -> QaRaster:
    return qa_from_raster(read_raster(path))


def write_qa(qa: QaRaster, path, variable="qa") -> None:
    write_raster(qa_to_raster(qa, variable), path)
