"""Inspection tool: grid, basis function and system dumps for debugging."""

from typing import Dict, Any, Optional, Tuple
import structlog

from ..analysis.manufactured import get_example
from ..core.exceptions import EXIT_OK, ValidationError, exit_code_for
from ..fem.assembly import assemble, dump_system
from ..fem.basis import build_extended_set, build_interior_set
from ..fem.mesh import build_grid, classify, dump_grid, regularity

logger = structlog.get_logger()

OPERATIONS = ("mesh", "basis", "system")


def format_basis_function(fn) -> str:
    """Per-cell global P2 coefficients (1, x, y, x^2, xy, y^2) of one basis function."""
    lines = [f"# phi {fn.center[0]},{fn.center[1]} anchor={fn.anchor_value!r} fit_residual={fn.fit_residual:.3e}"]
    for cell in sorted(fn.pieces):
        coeffs = " ".join(f"{c:.16e}" for c in fn.pieces[cell].global_coefficients())
        tag = "" if cell in fn.support else " ghost"
        lines.append(f"{cell[0]} {cell[1]} {coeffs}{tag}")
    return "\n".join(lines) + "\n"


class InspectionTool:
    """Builds one discretization and dumps a piece of it as text."""

    def run(
        self,
        operation: str = "mesh",
        domain: str = "square",
        mesh: str = "uniform",
        level: int = 2,
        ratio: Optional[float] = None,
        cell: Optional[Tuple[int, int]] = None,
        extended: bool = False,
        path: Optional[str] = None,
        example: int = 1,
        eps: float = 1.0
    ) -> Dict[str, Any]:
        """
        Inspect a discretization.

        Args:
            operation: mesh, basis (needs cell) or system (needs path)
            domain: square or lshape
            mesh: uniform or pattern
            level: Refinement level
            ratio: Split ratio of pattern meshes
            cell: Center cell (i, j) of the basis function to dump
            extended: Look the function up in the extended set
            path: Output file of the system dump
            example: Example whose source defines the load vector
            eps: Perturbation parameter of the dumped operator

        Returns:
            Text dumps and summary numbers
        """
        try:
            if operation not in OPERATIONS:
                raise ValidationError(f"Unknown operation: {operation}", field="operation", value=operation)

            grid = build_grid(domain, mesh, level, ratio)
            classification = classify(grid)
            result: Dict[str, Any] = {
                "operation": operation,
                "domain": domain,
                "mesh": mesh,
                "level": level,
                "h": grid.h,
                "regularity": regularity(grid),
                "classification": classification.summary(),
            }

            if operation == "mesh":
                result["text"] = dump_grid(grid)

            elif operation == "basis":
                if cell is None:
                    raise ValidationError("cell required for basis operation", field="cell")
                cell = (int(cell[0]), int(cell[1]))
                build = build_extended_set if extended else build_interior_set
                basis = build(grid, classification)
                if cell not in basis.index:
                    raise ValidationError(
                        f"Cell {cell} is not a center of the {basis.kind.value} basis",
                        field="cell", value=cell,
                    )
                result["text"] = format_basis_function(basis.functions[basis.index[cell]])

            else:
                if not path:
                    raise ValidationError("path required for system operation", field="path")
                setup = get_example(example)
                if setup.domain.value != domain:
                    raise ValidationError(
                        f"Example {example} is posed on the {setup.domain.value} domain",
                        field="example", value=example,
                    )
                system = assemble(build_interior_set(grid, classification), setup.source(eps))
                with open(path, "w", encoding="utf-8") as handle:
                    dump_system(system, handle, eps)
                logger.info(f"Wrote system to {path}", dofs=system.dim)
                result.update({"path": path, "dofs": system.dim, "nnz": int(system.A.nnz)})

            result["exit_code"] = EXIT_OK
            return result

        except Exception as e:
            logger.error(f"Inspection failed: {e}")
            return {
                "error": str(e),
                "error_type": type(e).__name__,
                "exit_code": exit_code_for(e),
                "operation": operation
            }
