"""File formats, configuration, model serialization and the synthetic scene."""

from aeromap.io.config import PipelineConfig, load_config
from aeromap.io.grid import (
    RasterFormatError,
    qa_from_raster,
    qa_to_raster,
    read_qa,
    read_raster,
    write_qa,
    write_raster,
)
from aeromap.io.layout import DayInputs, list_dates, read_day, write_day
from aeromap.io.serialize import ModelFormatError, load_model, save_model
from aeromap.io.stations import StationFormatError, read_stations, write_stations
from aeromap.io.synthetic import SyntheticScene, generate_synthetic_scene, write_scene
from aeromap.io.tables import SampleFormatError, read_samples, write_samples

__all__ = [
    "DayInputs",
    "ModelFormatError",
    "PipelineConfig",
    "RasterFormatError",
    "SampleFormatError",
    "StationFormatError",
    "SyntheticScene",
    "generate_synthetic_scene",
    "list_dates",
    "load_config",
    "load_model",
    "qa_from_raster",
    "qa_to_raster",
    "read_day",
    "read_qa",
    "read_raster",
    "read_samples",
    "read_stations",
    "save_model",
    "write_day",
    "write_qa",
    "write_raster",
    "write_samples",
    "write_scene",
    "write_stations",
]
