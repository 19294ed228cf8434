"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MicroruinError(Exception):
    """Base class for all package errors."""


class DomainError(MicroruinError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(MicroruinError):
    """One or more scenario-config invariants are violated.

    Attributes:
        errors: list of (field_path, message) pairs, one per violation.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"invalid scenario config: {lines}")


class AccuracyError(MicroruinError):
    """A numerical routine could not meet its requested tolerance.

    Attributes:
        diagnostics: free-form dict with partial results / achieved error.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class SupportError(MicroruinError):
    """Moments or samples are inconsistent with the declared support."""


class ResourceLimitError(MicroruinError):
    """A discretization or truncation budget would be exceeded."""
