"""High-resolution PM2.5 mapping from satellite AOD and gridded meteorology."""

from aeromap._accel import USE_NUMBA

__version__ = "0.1.0"

__all__ = ["USE_NUMBA", "__version__"]
