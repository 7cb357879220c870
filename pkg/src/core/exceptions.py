"""Custom exceptions for the RRM engine."""

from typing import Optional, Dict, Any, Iterable


class RRMError(Exception):
    """Base exception for the RRM engine."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ValidationError(RRMError):
    """Invalid user input."""

    def __init__(self, message: str, field: Optional[str] = None, value: Any = None):
        details = {}
        if field:
            details["field"] = field
        if value is not None:
            details["value"] = value
        super().__init__(message, details)


class MeshError(RRMError):
    """Invalid grid, classification or patch request."""
    pass


class CornerAdjacencyViolation(MeshError):
    """Two corner nodes lie in the same cell."""

    def __init__(self, message: str, cells: Optional[Iterable] = None):
        details = {}
        if cells:
            details["cells"] = [tuple(c) for c in cells]
        super().__init__(message, details)


class InconsistentDofs(RRMError):
    """Morley data that no quadratic reproduces."""

    def __init__(self, message: str, residual: float, tol: float):
        super().__init__(message, {"residual": residual, "tol": tol})
        self.residual = residual
        self.tol = tol


class EmptySpace(RRMError):
    """No interior cell, so the discrete space is trivial."""
    pass


class SolveFailure(RRMError):
    """Neither the direct nor the iterative solve met the tolerance."""
    pass


class DegenerateSubdomain(RRMError):
    """Subdomain with zero area."""
    pass


class InsufficientData(RRMError):
    """Not enough samples for a fit."""
    pass


class CacheError(RRMError):
    """Cache related errors."""
    pass


# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


def exit_code_for(error: BaseException) -> int:
    """Exit code reported for an exception raised by a tool."""
    if isinstance(error, ValidationError):
        return EXIT_USAGE
    return EXIT_NUMERICAL
