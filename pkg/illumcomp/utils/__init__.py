"""
illumcomp utilities package.

Exposes logging and error handling across the library and CLI.
"""

from illumcomp.utils.logging_config import setup_logging
from illumcomp.utils.errors import (
    IllumCompError,
    ValidationError,
    ShapeMismatchError,
    ConfigValidationError,
    InvalidRegionError,
    CorpusError,
    GeometryError,
    DegenerateQuadError,
    NonInvertibleHomographyError,
    NoRegionFoundError,
    IlluminationError,
    DegenerateIlluminationError,
    NearHorizontalLightError,
    NumericalError,
    NonFiniteLossError,
    StorageError,
)

__all__ = [
    "setup_logging",
    "IllumCompError",
    "ValidationError",
    "ShapeMismatchError",
    "ConfigValidationError",
    "InvalidRegionError",
    "CorpusError",
    "GeometryError",
    "DegenerateQuadError",
    "NonInvertibleHomographyError",
    "NoRegionFoundError",
    "IlluminationError",
    "DegenerateIlluminationError",
    "NearHorizontalLightError",
    "NumericalError",
    "NonFiniteLossError",
    "StorageError",
]
