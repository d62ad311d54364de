"""Climate-adaptation indicators, forecasting, POD flow sensing and wide-and-deep fusion."""

from .errors import (
    ClimAdaptError,
    ConfigError,
    FitError,
    FormatError,
    NumericalError,
    SolverError,
    TrainingError,
    ValidationError,
)
from .raster import Grid, Raster, load_raster, normalized_difference, save_raster

__version__ = "0.1.0"

__all__ = [
    "ClimAdaptError",
    "ConfigError",
    "FitError",
    "FormatError",
    "Grid",
    "NumericalError",
    "Raster",
    "SolverError",
    "TrainingError",
    "ValidationError",
    "load_raster",
    "normalized_difference",
    "save_raster",
]
