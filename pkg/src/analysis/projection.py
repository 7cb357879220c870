"""Projectivity tests for locally supported families and their L2 duals.

A family {phi_k} with subdomains D_k admits a projective quasi-interpolation
exactly when no phi_k restricted to D_k is a combination of the other
functions overlapping D_k. The test here decides that by a sampled weighted
least-squares fit; when phi_k is not representable, the dual function
psi_k = sum_j c_j phi_j on D_k with (psi_k, phi_j)_{D_k} = delta_kj is built
from the local Gram matrix.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Hashable, List, Optional, Sequence

import numpy as np
import structlog

from ..config import settings
from ..core.exceptions import DegenerateSubdomain, ValidationError
from ..fem.basis import BasisSet
from ..fem.mesh import Cell, Classification, TensorGrid
from ..fem.polynomial import gauss_rects

logger = structlog.get_logger()


@dataclass(frozen=True, eq=False)
class Subdomain:
    """Quadrature description of a region D.

    owners[q] indexes owner_keys and names the cell (or triangle) that holds
    point q; families use it to pick the right polynomial piece.
    """

    points: np.ndarray
    weights: np.ndarray
    owners: np.ndarray
    owner_keys: List[Hashable]
    polygon: Optional[np.ndarray] = None

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


class LocalBasisFamily(ABC):
    """Finite family of functions, each non-zero on a few owners."""

    @property
    @abstractmethod
    def size(self) -> int:
        ...

    @abstractmethod
    def candidates(self, region: Subdomain) -> List[int]:
        """Indices of functions that may be non-zero on the region."""

    @abstractmethod
    def evaluate(self, k: int, region: Subdomain) -> np.ndarray:
        """Values of function k at the region's points."""

    def sample_matrix(self, ids: Sequence[int], region: Subdomain) -> np.ndarray:
        """Columns sqrt(w) * phi_j at the region's points."""
        root = np.sqrt(region.weights)
        if not ids:
            return np.zeros((len(root), 0))
        return np.column_stack([root * self.evaluate(j, region) for j in ids])


Selection = Dict[int, Subdomain]


class Decision(str, Enum):
    REPRESENTABLE = "representable"
    NOT_REPRESENTABLE = "not_representable"


@dataclass
class ProjectivityResult:
    """Outcome of one rank test.

    witness maps overlapping ids to g_j with phi_k = sum g_j phi_j on D_k
    (minimum-norm choice, only for REPRESENTABLE). dependencies is an
    orthonormal basis, over overlapping ids in the listed order, of all
    coefficient vectors whose combination vanishes on D_k.
    """

    k: int
    decision: Decision
    residual: float
    overlapping: List[int]
    witness: Dict[int, float] = field(default_factory=dict)
    dependencies: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def representable(self) -> bool:
        return self.decision == Decision.REPRESENTABLE


def _check_region(k: int, region: Subdomain):
    if not region.area > 0.0:
        raise DegenerateSubdomain(f"Subdomain of function {k} has zero area", {"k": k})


def projectivity_test(family: LocalBasisFamily, selection: Selection, k: int,
                      tol: Optional[float] = None) -> ProjectivityResult:
    """Decide whether phi_k on D_k lies in the span of the other overlapping functions."""
    tol = settings.rank_tol if tol is None else tol
    if k not in selection:
        raise ValidationError(f"No subdomain selected for function {k}", field="k", value=k)
    region = selection[k]
    _check_region(k, region)

    overlapping = [k] + [j for j in family.candidates(region) if j != k]
    others = overlapping[1:]

    S = family.sample_matrix(overlapping, region)
    y = S[:, 0]
    M = S[:, 1:]
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        # phi_k vanishes on D_k: the zero combination reproduces it
        residual = 0.0
        g = np.zeros(len(others))
    elif M.shape[1] == 0:
        residual = 1.0
        g = np.zeros(0)
    else:
        g, *_ = np.linalg.lstsq(M, y, rcond=None)
        residual = float(np.linalg.norm(M @ g - y)) / ynorm

    # dependencies among all overlapping functions on D_k
    _, sing, vt = np.linalg.svd(S, full_matrices=True)
    top = sing[0] if sing.size else 0.0
    rank = int(np.sum(sing > tol * top)) if top > 0 else 0
    dependencies = vt[rank:].T

    decision = Decision.REPRESENTABLE if residual <= tol else Decision.NOT_REPRESENTABLE
    result = ProjectivityResult(
        k=k,
        decision=decision,
        residual=residual,
        overlapping=overlapping,
        witness=dict(zip(others, map(float, g))) if decision == Decision.REPRESENTABLE else {},
        dependencies=dependencies,
    )
    logger.debug("Projectivity test", k=k, decision=decision.value, residual=residual,
                 overlapping=len(overlapping))
    return result


@dataclass(frozen=True, eq=False)
class DualFunctional:
    """psi_k = sum_j coefficients[j] phi_j restricted to D_k."""

    k: int
    region: Subdomain
    ids: List[int]
    coefficients: np.ndarray

    def values(self, family: LocalBasisFamily) -> np.ndarray:
        S = np.column_stack([family.evaluate(j, self.region) for j in self.ids])
        return S @ self.coefficients

    def apply(self, family: LocalBasisFamily, sampler: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
        """integral over D_k of psi_k v; sampler receives the points and the owner key of each point."""
        keys = np.asarray(self.region.owner_keys)[self.region.owners]
        v = np.asarray(sampler(self.region.points, keys), dtype=float)
        return self.region.integrate(self.values(family) * v)

    def coefficient_of(self, j: int) -> float:
        return float(self.coefficients[self.ids.index(j)]) if j in self.ids else 0.0


def build_dual_functionals(family: LocalBasisFamily, selection: Selection,
                           tol: Optional[float] = None) -> Dict[int, DualFunctional]:
    """Dual functions on every selected subdomain; fails if some phi_k is representable."""
    duals: Dict[int, DualFunctional] = {}
    for k in sorted(selection):
        test = projectivity_test(family, selection, k, tol)
        if test.representable:
            raise ValidationError(
                f"Function {k} is representable on its subdomain; no dual exists",
                field="k", value=k,
            )
        region = selection[k]
        ids = test.overlapping
        S = family.sample_matrix(ids, region)
        G = S.T @ S
        rhs = np.zeros(len(ids))
        rhs[0] = 1.0
        c, *_ = np.linalg.lstsq(G, rhs, rcond=None)
        duals[k] = DualFunctional(k, region, ids, c)
    return duals


def duality_defect(family: LocalBasisFamily, duals: Dict[int, DualFunctional]) -> float:
    """max over k and overlapping j of |(psi_k, phi_j)_{D_k} - delta_kj|."""
    worst = 0.0
    for k, dual in duals.items():
        psi = dual.values(family)
        for j in dual.ids:
            pairing = dual.region.integrate(psi * family.evaluate(j, dual.region))
            worst = max(worst, abs(pairing - (1.0 if j == k else 0.0)))
    return worst


# ---------------------------------------------------------------------------
# RRM families
# ---------------------------------------------------------------------------

class RRMFamily(LocalBasisFamily):
    """Patch basis functions of a basis set, sampled cell by cell."""

    def __init__(self, basis: BasisSet):
        self.basis = basis

    @property
    def size(self) -> int:
        return len(self.basis)

    def candidates(self, region: Subdomain) -> List[int]:
        ids = set()
        for cell in region.owner_keys:
            ids.update(self.basis.covering.get(cell, []))
        return sorted(ids)

    def evaluate(self, k: int, region: Subdomain) -> np.ndarray:
        fn = self.basis.functions[k]
        values = np.zeros(len(region.weights))
        for idx, cell in enumerate(region.owner_keys):
            poly = fn.support.get(cell)
            if poly is None:
                continue
            mask = region.owners == idx
            values[mask] = poly(region.points[mask, 0], region.points[mask, 1])
        return values


def cells_subdomain(grid: TensorGrid, cells: Sequence[Cell], order: int = 3) -> Subdomain:
    """Union of active cells with an order x order Gauss rule on each."""
    cells = [tuple(c) for c in cells]
    if not cells:
        raise DegenerateSubdomain("Empty cell list")
    for cell in cells:
        if not grid.is_active(cell):
            raise ValidationError(f"Cell {cell} is not active", field="cells", value=cell)
    X, Y, W = gauss_rects(grid.bounds_array(cells), order)
    owners = np.repeat(np.arange(len(cells)), X.shape[1])
    return Subdomain(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), owners, cells)


def rrm_center_selection(basis: BasisSet, centers: Optional[Sequence[Cell]] = None) -> Selection:
    """D_K = K for functions whose center cell is active."""
    chosen = basis.centers if centers is None else centers
    return {
        basis.index[c]: cells_subdomain(basis.grid, [c])
        for c in chosen if basis.grid.is_active(c)
    }


def rrm_domain_selection(basis: BasisSet) -> Selection:
    """D_k = whole domain for every function."""
    region = cells_subdomain(basis.grid, basis.grid.active_cells)
    return {k: region for k in range(len(basis))}


def completely_subdomain_check(grid: TensorGrid, classification: Classification,
                               cells: Sequence[Cell]) -> bool:
    """True iff every listed cell is covered by nine interior patches."""
    if not cells:
        return False
    interior = classification.interior_cells
    for i, j in cells:
        if not grid.is_active((i, j)):
            return False
        if any((i + a, j + b) not in interior for a in (-1, 0, 1) for b in (-1, 0, 1)):
            return False
    return True


def checkerboard_distance(basis: BasisSet, result: ProjectivityResult) -> float:
    """Distance of the normalized checkerboard vector over the overlapping ids
    from the dependency subspace of the test."""
    board = basis.checkerboard_vector()[result.overlapping]
    board = board / np.linalg.norm(board)
    D = result.dependencies
    if D.size == 0:
        return 1.0
    return float(np.linalg.norm(board - D @ (D.T @ board)))


def run_family(family: LocalBasisFamily, selection: Selection,
               tol: Optional[float] = None) -> List[ProjectivityResult]:
    """projectivity_test over every selected function."""
    results = [projectivity_test(family, selection, k, tol) for k in sorted(selection)]
    n_rep = sum(r.representable for r in results)
    logger.info("Projectivity sweep", functions=len(results), representable=n_rep)
    return results
