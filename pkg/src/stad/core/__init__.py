"""Core components: environment settings and the exception hierarchy."""

from .config import config, validate_config
from .exceptions import (
    ArtifactError,
    ArtifactFormatError,
    ConfigError,
    DataError,
    GraphError,
    NumericError,
    ShapeError,
    StadError,
    UnsupportedArchitectureError,
)

__all__ = [
    "config",
    "validate_config",
    "StadError",
    "ConfigError",
    "UnsupportedArchitectureError",
    "DataError",
    "NumericError",
    "ShapeError",
    "GraphError",
    "ArtifactError",
    "ArtifactFormatError",
]
