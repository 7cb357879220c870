"""Core components: exceptions and the discretization cache."""

from .cache_manager import CacheManager
from .exceptions import (
    RRMError,
    ValidationError,
    MeshError,
    CornerAdjacencyViolation,
    InconsistentDofs,
    EmptySpace,
    SolveFailure,
    DegenerateSubdomain,
    InsufficientData,
    CacheError
)

__all__ = [
    "CacheManager",
    "RRMError",
    "ValidationError",
    "MeshError",
    "CornerAdjacencyViolation",
    "InconsistentDofs",
    "EmptySpace",
    "SolveFailure",
    "DegenerateSubdomain",
    "InsufficientData",
    "CacheError"
]
