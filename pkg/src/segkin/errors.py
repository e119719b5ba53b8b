"""Exception hierarchy shared by every segkin module."""

from __future__ import annotations


class SegkinError(Exception):
    """Base class for all errors raised by segkin."""


class DomainError(SegkinError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(SegkinError, ValueError):
    """A grid, potential or run configuration is inconsistent."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]


class ConvergenceError(SegkinError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float | None = None, log: list | None = None):
        super().__init__(message)
        self.residual = residual
        self.log = log or []


class AssemblyError(SegkinError, RuntimeError):
    """A discrete operator failed one of its structural checks."""
