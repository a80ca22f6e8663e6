"""On-disk layout of a pipeline data directory.

::

    DATA/
      stations.csv
      days/YYYY-MM-DD/aod_aqua.grid  aod_terra.grid  qa_aqua.grid  qa_terra.grid
                      u10.grid v10.grid d2m.grid t2m.grid blh.grid sp.grid
                      lai_hv.grid lai_lv.grid cdir.grid uvb.grid

AOD and QA grids share the fine grid; meteorological grids share their own
(coarser) grid.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

from aeromap.datamodel import QaRaster, Raster
from aeromap.io.grid import read_qa, read_raster, write_qa, write_raster

MET_RAW = ("u10", "v10", "d2m", "t2m", "blh", "sp", "lai_hv", "lai_lv", "cdir", "uvb")
DAYS_DIR = "days"
STATIONS_FILE = "stations.csv"


@dataclass(frozen=True)
class DayInputs:
    date: dt.date
    aod_aqua: Raster
    aod_terra: Raster
    qa_aqua: QaRaster
    qa_terra: QaRaster
    met: dict

    def satellite_compatible(self) -> bool:
        s = self.aod_aqua.spec
        return all(s.compatible(o.spec) for o in (self.aod_terra, self.qa_aqua, self.qa_terra))

    def met_compatible(self) -> bool:
        specs = [r.spec for r in self.met.values()]
        return bool(specs) and all(specs[0].compatible(o) for o in specs[1:])


def day_dir(root, date: dt.date) -> Path:
    return Path(root) / DAYS_DIR / date.isoformat()


def list_dates(root) -> list[dt.date]:
    base = Path(root) / DAYS_DIR
    if not base.is_dir():
        return []
    out = []
    for p in base.iterdir():
        try:
            out.append(dt.date.fromisoformat(p.name))
        except ValueError:
            continue
    return sorted(out)


def write_day(root, day: DayInputs) -> None:
    d = day_dir(root, day.date)
    d.mkdir(parents=True, exist_ok=True)
    write_raster(day.aod_aqua, d / "aod_aqua.grid")
    write_raster(day.aod_terra, d / "aod_terra.grid")
    write_qa(day.qa_aqua, d / "qa_aqua.grid")
    write_qa(day.qa_terra, d / "qa_terra.grid")
    for name in MET_RAW:
        write_raster(day.met[name], d / f"{name}.grid")


def read_day(root, date: dt.date) -> DayInputs:
    d = day_dir(root, date)
    met = {name: read_raster(d / f"{name}.grid") for name in MET_RAW}
    return DayInputs(date, read_raster(d / "aod_aqua.grid"), read_raster(d / "aod_terra.grid"),
                     read_qa(d / "qa_aqua.grid"), read_qa(d / "qa_terra.grid"), met)
