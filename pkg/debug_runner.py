#!/usr/bin/env python3
"""Debug runner for calling the tools directly."""

import os
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

# Set environment variables
os.environ.setdefault("LOG_LEVEL", "DEBUG")

# Import the tool classes directly
from src.cli import configure_logging
from src.tools import (
    ConvergenceStudyTool,
    InspectionTool,
    ProjectionTool,
    VerificationTool
)


def debug_convergence():
    """Coarse convergence run."""
    print("\n=== Testing Convergence Study ===")
    tool = ConvergenceStudyTool()

    result = tool.run(
        example=1,
        mesh="uniform",
        eps=[1.0, 2.0 ** -6],
        levels=[2, 3, 4],
        check_tables=True
    )
    print(result.get("csv", result))
    print(f"Check: {result.get('check')}")


def debug_verification():
    """Basis identities only."""
    print("\n=== Testing Verification ===")
    tool = VerificationTool()

    result = tool.run(suite="basis")
    for check in result.get("checks", {}).get("basis", []):
        print(f"{'ok  ' if check['passed'] else 'FAIL'} {check['name']}: {check['value']:.3e}")


def debug_projection():
    """RRM patch selection and the CR dual demo."""
    print("\n=== Testing Projectivity ===")
    tool = ProjectionTool()

    result = tool.run(family="rrm", selection="patch", n=6)
    print(f"RRM patch: {result.get('representable')} of {result.get('functions')} representable")

    # result = tool.run(family="cr", selection="s3", n=4)
    # print(f"CR S3 duality defect: {result.get('duality_defect')}")

    result = tool.run(family="cr", selection="s1", n=4, dual_demo=True)
    for item in result.get("dual_demo", {}).get("edges", []):
        print(f"{item['kind']} at {item['fraction']}: {item['multiset']}")


def debug_inspection():
    """Basis function of the central cell of the 4x4 grid."""
    print("\n=== Testing Inspection ===")
    tool = InspectionTool()

    result = tool.run(operation="basis", level=2, cell=(1, 1))
    print(result.get("text", result))


def main():
    """Run all debug calls."""
    configure_logging()
    from src.config import settings
    print(f"Settings: gamma0={settings.gamma0} pattern_ratio={settings.pattern_ratio} "
          f"rank_tol={settings.rank_tol}")

    # Run specific test based on command line argument
    if len(sys.argv) > 1:
        test_name = sys.argv[1]
        if test_name == "convergence":
            debug_convergence()
        elif test_name == "verify":
            debug_verification()
        elif test_name == "projection":
            debug_projection()
        elif test_name == "inspect":
            debug_inspection()
        else:
            print(f"Unknown test: {test_name}")
            print("Available tests: convergence, verify, projection, inspect")
    else:
        debug_inspection()
        debug_projection()
        debug_verification()
        debug_convergence()


if __name__ == "__main__":
    main()
