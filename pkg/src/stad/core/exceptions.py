"""Exception hierarchy shared by the library and the CLI.

Every error class carries the process exit code the CLI reports for it.
"""


class StadError(Exception):
    """Base class for all errors raised by the package."""

    exit_code: int = 1


class ConfigError(StadError):
    """Invalid run configuration, unsupported architecture or stage mismatch."""

    exit_code = 2


class UnsupportedArchitectureError(ConfigError):
    """Raised for receptive fields or layer kinds the networks do not support."""


class DataError(StadError):
    """Missing, empty or inconsistent input data."""

    exit_code = 3


class NumericError(StadError):
    """Non-finite values or invalid numeric state."""

    exit_code = 4


class ShapeError(NumericError):
    """Operand shapes do not agree."""


class GraphError(NumericError):
    """Backward pass requested on a tensor the graph did not record."""


class ArtifactError(StadError):
    """A required upstream artifact is missing."""

    exit_code = 5


class ArtifactFormatError(ArtifactError):
    """Corrupt header, unknown version or truncated payload."""
