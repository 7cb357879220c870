"""Command tools: convergence studies, property suites, projectivity and inspection."""

from .convergence import ConvergenceStudyTool
from .verification import VerificationTool
from .projection import ProjectionTool
from .inspection import InspectionTool

__all__ = [
    "ConvergenceStudyTool",
    "VerificationTool",
    "ProjectionTool",
    "InspectionTool"
]
