"""Errors raised by aadkit."""
from __future__ import annotations

from typing import Any


class AadkitError(Exception):
    """Base class for every aadkit error."""


class ShapeError(AadkitError):
    """Raised when an array does not have the expected dimensions."""

    def __init__(self, what: str, expected: Any, actual: Any) -> None:
        """Initialize with the offending quantity and both shapes."""
        super().__init__(f"{what}: expected {expected}, got {actual}")
        self.what = what
        self.expected = expected
        self.actual = actual


class SignalError(AadkitError):
    """Raised for invalid signal processing requests."""


class DecoderError(AadkitError):
    """Raised when a linear decoder cannot be fitted or applied."""


class NetworkError(AadkitError):
    """Raised for invalid network layers or inputs."""


class TrainingError(AadkitError):
    """Raised when training cannot continue."""


class FoldError(AadkitError):
    """Raised when a cross-validation plan cannot be built."""


class MesdError(AadkitError):
    """Raised for invalid MESD inputs."""


class DatasetError(AadkitError):
    """Raised for dataset format problems."""

    def __init__(self, message: str, entry: str | None = None) -> None:
        """Initialize with the id of the offending manifest entry."""
        super().__init__(f"{entry}: {message}" if entry else message)
        self.entry = entry


class CheckpointError(AadkitError):
    """Raised when a checkpoint cannot be written or read."""


class ConfigError(AadkitError):
    """Raised for invalid run configuration."""
