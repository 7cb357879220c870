"""Projectivity tool: rank decisions, witnesses and dual coefficient tables."""

from typing import Dict, Any, Optional
import numpy as np
import structlog

from ..analysis.crouzeix_raviart import (
    CRFamily,
    CRMesh,
    cr_dual_demo,
    cr_selection,
    polygon_subdomain,
)
from ..analysis.projection import (
    RRMFamily,
    build_dual_functionals,
    checkerboard_distance,
    completely_subdomain_check,
    duality_defect,
    rrm_center_selection,
    rrm_domain_selection,
    run_family,
)
from ..core.exceptions import EXIT_OK, ValidationError, exit_code_for
from ..fem.basis import build_extended_set, build_interior_set
from ..fem.mesh import build_uniform, classify

logger = structlog.get_logger()

SELECTIONS = {
    "rrm": ("patch", "omega"),
    "cr": ("s1", "s2", "s3", "omega"),
}


class ProjectionTool:
    """Decides, function by function, whether a local projective interpolation exists."""

    def run(
        self,
        family: str = "rrm",
        selection: str = "patch",
        n: int = 6,
        fraction: float = 0.25,
        tol: Optional[float] = None,
        dual_demo: bool = False,
        h: float = 0.25
    ) -> Dict[str, Any]:
        """
        Run projectivity tests.

        Args:
            family: rrm (extended RRM family) or cr (Crouzeix-Raviart)
            selection: patch or omega for rrm; s1, s2, s3 or omega for cr
            n: Cells per side of the unit-square mesh
            fraction: Position of the S3 diamond along each edge
            tol: Relative residual threshold of the rank decision
            dual_demo: Add the h^2-scaled CR dual coefficient report
            h: Mesh size of the dual coefficient report

        Returns:
            Decisions per function and, for cr, dual coefficients
        """
        try:
            if family not in SELECTIONS:
                raise ValidationError(f"Unknown family: {family}", field="family", value=family)
            if selection not in SELECTIONS[family]:
                raise ValidationError(
                    f"Selection {selection} is not defined for family {family}",
                    field="selection", value=selection,
                )
            if n < 1:
                raise ValidationError("n must be positive", field="n", value=n)

            if family == "rrm":
                result = self._rrm(selection, n, tol)
            else:
                result = self._cr(selection, n, fraction, tol)

            if dual_demo:
                result["dual_demo"] = cr_dual_demo(h).model_dump()
            result["exit_code"] = EXIT_OK
            return result

        except Exception as e:
            logger.error(f"Projectivity analysis failed: {e}")
            return {
                "error": str(e),
                "error_type": type(e).__name__,
                "exit_code": exit_code_for(e),
                "family": family,
                "selection": selection
            }

    def _rrm(self, selection: str, n: int, tol: Optional[float]) -> Dict[str, Any]:
        grid = build_uniform(n=n)
        classification = classify(grid)
        if selection == "patch":
            # extended family on completely covered cells
            basis = build_extended_set(grid, classification)
            centers = [c for c in grid.active_cells
                       if completely_subdomain_check(grid, classification, [c])]
            if not centers:
                raise ValidationError(f"No completely covered cell on a {n}x{n} grid", field="n", value=n)
            chosen = rrm_center_selection(basis, centers)
        else:
            # whole domain with the independent interior family
            basis = build_interior_set(grid, classification)
            chosen = rrm_domain_selection(basis)

        results = run_family(RRMFamily(basis), chosen, tol)
        decisions = []
        for r in results:
            entry = {
                "function": list(basis.functions[r.k].center),
                "decision": r.decision.value,
                "residual": r.residual,
                "overlapping": len(r.overlapping),
            }
            if r.representable:
                entry["witness"] = {
                    str(basis.functions[j].center): g for j, g in r.witness.items()
                }
                entry["dependencies"] = int(r.dependencies.shape[1])
                entry["checkerboard_distance"] = checkerboard_distance(basis, r)
            decisions.append(entry)

        return {
            "family": "rrm",
            "selection": selection,
            "basis": basis.kind.value,
            "functions": len(results),
            "representable": sum(r.representable for r in results),
            "decisions": decisions,
        }

    def _cr(self, selection: str, n: int, fraction: float, tol: Optional[float]) -> Dict[str, Any]:
        mesh = CRMesh(n)
        family = CRFamily(mesh)
        if selection == "omega":
            square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
            region = polygon_subdomain(mesh, square)
            chosen = {e: region for e in range(mesh.size)}
        else:
            chosen = cr_selection(mesh, selection.upper(), fraction)

        results = run_family(family, chosen, tol)
        decisions = [
            {
                "edge": mesh.edge_label(r.k),
                "kind": mesh.edge_kind(r.k),
                "decision": r.decision.value,
                "residual": r.residual,
                "overlapping": len(r.overlapping),
            }
            for r in results
        ]
        result = {
            "family": "cr",
            "selection": selection,
            "h": mesh.h,
            "functions": len(results),
            "representable": sum(r.representable for r in results),
            "decisions": decisions,
        }

        if not any(r.representable for r in results):
            duals = build_dual_functionals(family, chosen, tol)
            scale = mesh.h ** 2
            result["duality_defect"] = duality_defect(family, duals)
            result["duals"] = {
                mesh.edge_label(k): {mesh.edge_label(j): float(c * scale) for j, c in zip(d.ids, d.coefficients)}
                for k, d in duals.items()
                if mesh.is_interior_edge(k)
            }
        return result
