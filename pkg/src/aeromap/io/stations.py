"""Ground-station CSV: ``station_id,lat,lon,date,pm25``.

``pm25`` is the daily mean in µg/m³; an empty field means the day had fewer
than 80% valid hourly readings and is treated as missing.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from pathlib import Path

from aeromap.datamodel import StationRecord
from aeromap.io.grid import atomic_write_text

COLUMNS = ("station_id", "lat", "lon", "date", "pm25")


class StationFormatError(ValueError):
    pass


def read_stations(path) -> list[StationRecord]:
    records = []
    seen = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise StationFormatError(f"{path}:1: header must be {','.join(COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(COLUMNS):
                raise StationFormatError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(row)}")
            sid, lat, lon, date, pm = (c.strip() for c in row)
            try:
                rec = StationRecord(
                    sid, float(lat), float(lon), dt.date.fromisoformat(date),
                    float(pm) if pm else None,
                )
            except ValueError as exc:
                raise StationFormatError(f"{path}:{lineno}: {exc}") from None
            key = (sid, rec.date)
            if key in seen:
                raise StationFormatError(
                    f"{path}:{lineno}: duplicate record for station {sid} on {date} "
                    f"(first at line {seen[key]})")
            seen[key] = lineno
            records.append(rec)
    return records


def write_stations(records, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([r.station_id, f"{r.lat:.6f}", f"{r.lon:.6f}", r.date.isoformat(),
                    "" if r.pm25 is None else f"{r.pm25:.6g}"])
    atomic_write_text(Path(path), buf.getvalue())
