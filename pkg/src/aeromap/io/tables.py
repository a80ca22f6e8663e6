"""Sample tables as CSV.

Columns are ``station_id,date``, the 19 predictors and ``PM_c``. Floats are
written in shortest round-trip form so a reload reproduces training exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import io

from aeromap.datamodel import FEATURES, TARGET, Sample
from aeromap.io.grid import atomic_write_text

COLUMNS = ("station_id", "date") + FEATURES + (TARGET,)


class SampleFormatError(ValueError):
    pass


def write_samples(samples, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for s in samples:
        w.writerow([s.station_id, s.date.isoformat()]
                   + [repr(float(s.features[f])) for f in FEATURES] + [repr(float(s.target))])
    atomic_write_text(path, buf.getvalue())


def read_samples(path) -> list[Sample]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise SampleFormatError(f"{path}: header must be {','.join(COLUMNS)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise SampleFormatError(f"{path}:{i}: expected {len(COLUMNS)} fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[1])
            vals = [float(x) for x in row[2:]]
            out.append(Sample(row[0], date, dict(zip(FEATURES, vals[:-1])), vals[-1]))
        except ValueError as exc:
            raise SampleFormatError(f"{path}:{i}: {exc}") from None
    return out
