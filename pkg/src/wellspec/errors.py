"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class OverlapError(ValueError):
    """Two potential supports overlap.

    ``report`` carries the :class:`~wellspec.geometry.ValidationReport`
    describing the closest offending pair.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ConvergenceError(RuntimeError):
    """A root search or refinement loop failed to converge.

    ``diagnostics`` holds whatever history the caller accumulated.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SpectralBoundViolation(AssertionError):
    """A computed quantity broke a bound that must hold exactly."""
