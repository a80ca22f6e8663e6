"""Core value types shared by every stage.

Grids are north-up: latitude decreases with row index, longitude increases
with column index. ``origin_lat``/``origin_lon`` locate the *center* of cell
(0, 0). Missing raster values are NaN in memory and ``NA`` on disk.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# Predictor names, in canonical column order.
FEATURES: tuple[str, ...] = (
    "AODm", "nAODm", "Prob_bestm", "Prob_medm", "lat", "long",
    "d2m", "t2m", "blh", "sp", "lai_hv", "lai_lv", "ws10", "wd10",
    "cdir", "uvb", "RH", "month", "DOY",
)
TARGET = "PM_c"


class Season(enum.Enum):
    WARM = "warm"
    COLD = "cold"


def season_of(date: dt.date) -> Season:
    """April through September is warm, October through March is cold."""
    return Season.WARM if 4 <= date.month <= 9 else Season.COLD


class Cloud(enum.IntEnum):
    CLEAR = 0
    POSSIBLY_CLOUDY = 1
    CLOUDY = 2
    MISSING = 3


class Adjacency(enum.IntEnum):
    NORMAL_CLEAR = 0
    ADJACENT = 1
    MISSING = 2


class AodQuality(enum.IntEnum):
    BEST = 0
    MEDIUM = 1
    LOW = 2
    MISSING = 3


class Cell(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class GridSpec:
    n_rows: int
    n_cols: int
    origin_lat: float
    origin_lon: float
    cell_size: float
    timestamp: dt.date | None = None

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.n_rows}x{self.n_cols}")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def size(self) -> int:
        return self.n_rows * self.n_cols

    def compatible(self, other: GridSpec) -> bool:
        """Join compatibility: equal spatial fields, timestamp ignored."""
        return (
            self.n_rows == other.n_rows
            and self.n_cols == other.n_cols
            and self.origin_lat == other.origin_lat
            and self.origin_lon == other.origin_lon
            and self.cell_size == other.cell_size
        )

    def with_date(self, date: dt.date | None) -> GridSpec:
        return GridSpec(self.n_rows, self.n_cols, self.origin_lat, self.origin_lon,
                        self.cell_size, date)

    def center_of(self, row: int, col: int) -> tuple[float, float]:
        return (self.origin_lat - row * self.cell_size,
                self.origin_lon + col * self.cell_size)

    def cell_of(self, lat: float, lon: float) -> Cell | None:
        """Nearest cell center, or ``None`` when the point lies off the grid.

        A point exactly on the outer edge of the last cell is out of bounds;
        there is no clamping.
        """
        r = math.floor((self.origin_lat - lat) / self.cell_size + 0.5)
        c = math.floor((lon - self.origin_lon) / self.cell_size + 0.5)
        if 0 <= r < self.n_rows and 0 <= c < self.n_cols:
            return Cell(r, c)
        return None

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-cell center latitude and longitude, each shaped like the grid."""
        rows, cols = np.indices(self.shape)
        return (self.origin_lat - rows * self.cell_size,
                self.origin_lon + cols * self.cell_size)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Raster:
    """One variable on one grid at one date. NaN marks a missing cell."""

    spec: GridSpec
    values: np.ndarray
    variable: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.size != self.spec.size:
            raise ValueError(f"raster holds {v.size} values, grid needs {self.spec.size}")
        v = v.reshape(self.spec.shape)
        if np.isinf(v).any():
            raise ValueError("raster values must be finite or missing")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def at(self, cell: Cell) -> float:
        return float(self.values[cell.row, cell.col])


@dataclass(frozen=True)
class QaRaster:
    """Per-pixel MAIAC-style quality flags, one integer code array per mask."""

    spec: GridSpec
    cloud: np.ndarray
    adjacency: np.ndarray
    aod_quality: np.ndarray

    def __post_init__(self):
        for name in ("cloud", "adjacency", "aod_quality"):
            a = np.asarray(getattr(self, name), dtype=np.int8)
            if a.size != self.spec.size:
                raise ValueError(f"QA {name} holds {a.size} codes, grid needs {self.spec.size}")
            object.__setattr__(self, name, _frozen(a.reshape(self.spec.shape)))

    @classmethod
    def all_missing(cls, spec: GridSpec) -> QaRaster:
        return cls(spec,
                   np.full(spec.shape, Cloud.MISSING),
                   np.full(spec.shape, Adjacency.MISSING),
                   np.full(spec.shape, AodQuality.MISSING))

    def condition_medium(self) -> np.ndarray:
        """Clear adjacency and a clear or possibly-cloudy sky."""
        return (self.adjacency == Adjacency.NORMAL_CLEAR) & (
            (self.cloud == Cloud.CLEAR) | (self.cloud == Cloud.POSSIBLY_CLOUDY))

    def condition_best(self) -> np.ndarray:
        """Clear adjacency, clear sky and a best-quality AOD flag."""
        return ((self.adjacency == Adjacency.NORMAL_CLEAR)
                & (self.cloud == Cloud.CLEAR)
                & (self.aod_quality == AodQuality.BEST))


@dataclass(frozen=True)
class StationRecord:
    station_id: str
    lat: float
    lon: float
    date: dt.date
    pm25: float | None

    def __post_init__(self):
        if self.pm25 is not None and not (self.pm25 >= 0 and math.isfinite(self.pm25)):
            raise ValueError(f"pm25 must be finite and non-negative, got {self.pm25}")


@dataclass(frozen=True)
class Sample:
    station_id: str
    date: dt.date
    features: Mapping[str, float] = field(default_factory=dict)
    target: float = math.nan

    def __post_init__(self):
        missing = [f for f in FEATURES if f not in self.features]
        if missing:
            raise ValueError(f"sample lacks features {missing}")
        if not 1 <= self.features["month"] <= 12:
            raise ValueError("month out of range")
        if not 1 <= self.features["DOY"] <= 366:
            raise ValueError("DOY out of range")
        if not 0 <= self.features["RH"] < 100:
            raise ValueError("RH out of range")


def feature_matrix(samples, features=FEATURES) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into an ``(n, p)`` design matrix and a target vector."""
    X = np.array([[s.features[f] for f in features] for s in samples], dtype=np.float64)
    y = np.array([s.target for s in samples], dtype=np.float64)
    return X.reshape(len(samples), len(features)), y
