"""Convergence study tool."""

from typing import Dict, Any, Optional, List
import structlog

from ..analysis.study import (
    check_against_published,
    run_convergence,
    table_to_csv,
    write_csv,
)
from ..core.exceptions import EXIT_ACCEPTANCE, EXIT_OK, exit_code_for

logger = structlog.get_logger()


class ConvergenceStudyTool:
    """Runs one manufactured-solution study and reports errors and rates."""

    def run(
        self,
        example: int,
        mesh: str = "uniform",
        eps: Optional[List[float]] = None,
        levels: Optional[List[int]] = None,
        ratio: Optional[float] = None,
        out: Optional[str] = None,
        check_tables: bool = False,
        with_interpolation: bool = False
    ) -> Dict[str, Any]:
        """
        Run a convergence study.

        Args:
            example: Example id (1, 2 or 3)
            mesh: Mesh family (uniform or pattern)
            eps: Perturbation parameters, default per example
            levels: Refinement levels, default per mesh family
            ratio: Split ratio of pattern meshes
            out: CSV path; the CSV text is returned either way
            check_tables: Compare against the published table
            with_interpolation: Add the interpolation error column

        Returns:
            Rows, rates, CSV text and the acceptance verdict
        """
        try:
            table = run_convergence(
                example_id=example,
                mesh_kind=mesh,
                eps_list=eps,
                levels=levels,
                pattern_ratio=ratio,
                with_interpolation=with_interpolation,
            )

            result = {
                "example": table.example_id,
                "mesh": table.mesh_kind,
                "pattern_ratio": table.pattern_ratio,
                "rows": [row.model_dump() for row in table.rows],
                "rates": {str(k): v for k, v in table.rates.items()},
                "pairwise_rates": {str(k): v for k, v in table.pairwise_rates.items()},
                "csv": table_to_csv(table),
                "exit_code": EXIT_OK,
            }
            if out:
                result["out"] = write_csv(table, out)

            if check_tables:
                failures, notes = check_against_published(table)
                result["check"] = {
                    "passed": not failures,
                    "failures": failures,
                    "notes": notes,
                }
                if failures:
                    logger.warning(f"{len(failures)} published values missed", example=example, mesh=mesh)
                    result["exit_code"] = EXIT_ACCEPTANCE

            return result

        except Exception as e:
            logger.error(f"Convergence study failed: {e}")
            return {
                "error": str(e),
                "error_type": type(e).__name__,
                "exit_code": exit_code_for(e),
                "example": example,
                "mesh": mesh
            }
