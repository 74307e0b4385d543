"""
Exception hierarchy for lifemine

Every error raised on purpose by the library derives from LifemineError
so the CLI can map failures to exit codes.
"""

from typing import Any, Optional


class LifemineError(Exception):
    """Base class for all lifemine errors."""


class ConfigurationError(LifemineError):
    """Invalid parameters or configuration files."""

    def __init__(self, message: str, field: Optional[str] = None, value: Any = None):
        self.field = field
        self.value = value
        super().__init__(message)


class FactorizationError(LifemineError, ValueError):
    """Invalid input to a matrix or tensor decomposition (rank, shapes, signs)."""

    def __init__(self, message: str, k: Optional[int] = None, shape: Optional[tuple] = None):
        self.k = k
        self.shape = shape
        super().__init__(message)


class AnalysisError(LifemineError, ValueError):
    """Downstream analysis received input it cannot summarise."""
