"""Patch basis functions of the reduced rectangular Morley space.

Every function phi_K lives on the 3x3 patch around its center cell K. Its
Morley data on the patch are fixed in closed form by the patch sizes; each of
the nine cells then receives the quadratic fitted to those data.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field

from ..config import settings
from ..core.exceptions import EmptySpace, ValidationError
from .fields import field_from_coefficients
from .mesh import Cell, Classification, Patch3x3, TensorGrid, patch
from .polynomial import MorleyDofs, P2Poly, Rect, fit_p2_from_morley, gauss_rect

logger = structlog.get_logger()


class BasisKind(str, Enum):
    INTERIOR = "interior"
    EXTENDED = "extended"


@dataclass(frozen=True, eq=False)
class PatchBasisFn:
    """One basis function: its patch, its Morley data and its nine pieces.

    vertex_values[m, n] is the value at (a_m, b_n); dy_means[m, n] is the mean
    of d/dy over x-segment m of line y = b_n; dx_means[m, n] is the mean of
    d/dx over y-segment n of line x = a_m.
    """

    center: Cell
    patch: Patch3x3
    anchor_value: float
    vertex_values: np.ndarray
    dy_means: np.ndarray
    dx_means: np.ndarray
    pieces: Dict[Cell, P2Poly]
    support: Dict[Cell, P2Poly]
    fit_residual: float

    def piece_dofs(self, p: int, q: int) -> MorleyDofs:
        return _cell_dofs(self.vertex_values, self.dy_means, self.dx_means, p, q)


def patch_ratios(patch_: Patch3x3) -> Tuple[float, float, float]:
    """(anchor, gamma_x, gamma_y) of a patch."""
    Lm, L, Lp = patch_.lengths
    Hm, H, Hp = patch_.heights
    anchor = Lm / (Lm + L) * Hm / (Hm + H)
    gx = (1.0 + L / Lm) / (1.0 + L / Lp)
    gy = (1.0 + H / Hm) / (1.0 + H / Hp)
    return anchor, gx, gy


def patch_dofs(patch_: Patch3x3) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form Morley data of phi_K on its patch; zero on the patch boundary."""
    Lm, _, Lp = patch_.lengths
    Hm, _, Hp = patch_.heights
    anchor, gx, gy = patch_ratios(patch_)

    V = np.zeros((4, 4))
    V[1, 1], V[2, 1], V[1, 2], V[2, 2] = 1.0, gx, gy, gx * gy

    U = np.zeros((3, 4))
    U[:, 1] = np.array([1.0, 1.0 + gx, gx]) / Hm
    U[:, 2] = -gy * np.array([1.0, 1.0 + gx, gx]) / Hp

    Z = np.zeros((4, 3))
    Z[1, :] = np.array([1.0, 1.0 + gy, gy]) / Lm
    Z[2, :] = -gx * np.array([1.0, 1.0 + gy, gy]) / Lp

    return anchor, anchor * V, anchor * U, anchor * Z


def _cell_dofs(V: np.ndarray, U: np.ndarray, Z: np.ndarray, p: int, q: int) -> MorleyDofs:
    vertex_values = [V[p, q], V[p + 1, q], V[p, q + 1], V[p + 1, q + 1]]
    normals = [-U[p, q], U[p, q + 1], -Z[p, q], Z[p + 1, q]]
    return MorleyDofs(vertex_values, normals)


def build_phi(patch_: Patch3x3, tol: Optional[float] = None) -> PatchBasisFn:
    """Fit the nine quadratic pieces of the basis function centred on the patch."""
    anchor, V, U, Z = patch_dofs(patch_)
    pieces: Dict[Cell, P2Poly] = {}
    support: Dict[Cell, P2Poly] = {}
    worst = 0.0
    for p, q, pc in patch_.iter_cells():
        poly, residual = fit_p2_from_morley(pc.rect, _cell_dofs(V, U, Z, p, q), tol)
        worst = max(worst, residual)
        pieces[pc.index] = poly
        if pc.real:
            support[pc.index] = poly
    for arr in (V, U, Z):
        arr.setflags(write=False)
    return PatchBasisFn(
        center=patch_.center,
        patch=patch_,
        anchor_value=anchor,
        vertex_values=V,
        dy_means=U,
        dx_means=Z,
        pieces=pieces,
        support=support,
        fit_residual=worst,
    )


def checkerboard_sign(cell: Cell) -> int:
    """d_T = (-1)^(i + j)."""
    return 1 if (cell[0] + cell[1]) % 2 == 0 else -1


@dataclass(eq=False)
class BasisSet:
    """Indexed family of patch basis functions with the inverse cell cover."""

    kind: BasisKind
    grid: TensorGrid
    classification: Classification
    functions: List[PatchBasisFn]
    ghost_scale: float = 1.0
    index: Dict[Cell, int] = field(init=False)
    covering: Dict[Cell, List[int]] = field(init=False)
    checkerboard: np.ndarray = field(init=False)

    def __post_init__(self):
        self.index = {fn.center: k for k, fn in enumerate(self.functions)}
        self.covering = {}
        for k, fn in enumerate(self.functions):
            for cell in fn.support:
                self.covering.setdefault(cell, []).append(k)
        self.checkerboard = np.array([checkerboard_sign(fn.center) for fn in self.functions])

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def centers(self) -> List[Cell]:
        return [fn.center for fn in self.functions]

    def rect(self, cell: Cell) -> Rect:
        """Geometry of a center cell, ghost cells included."""
        return self.grid.lattice_rect(cell, self.ghost_scale)

    def coverage_counts(self) -> Dict[Cell, int]:
        return {cell: len(self.covering.get(cell, [])) for cell in self.grid.active_cells}

    def checkerboard_vector(self) -> np.ndarray:
        """c_T = d_T L_T H_T."""
        return np.array([
            checkerboard_sign(fn.center) * fn.patch.center_rect.area for fn in self.functions
        ])


def _build_set(kind: BasisKind, grid: TensorGrid, classification: Classification,
               centers: Sequence[Cell], ghost_scale: float, tol: Optional[float]) -> BasisSet:
    functions = [build_phi(patch(grid, classification, c, ghost_scale), tol) for c in centers]
    basis = BasisSet(kind, grid, classification, functions, ghost_scale)
    logger.info(f"Built {kind.value} basis", functions=len(functions), cells=grid.n_active,
                worst_fit=max(fn.fit_residual for fn in functions))
    return basis


def build_interior_set(grid: TensorGrid, classification: Classification,
                       ghost_scale: float = 1.0, tol: Optional[float] = None) -> BasisSet:
    """Basis of the homogeneous-boundary space: one function per interior cell."""
    centers = sorted(classification.interior_cells)
    if not centers:
        raise EmptySpace("Grid has no interior cell", {"cells": grid.n_active})
    return _build_set(BasisKind.INTERIOR, grid, classification, centers, ghost_scale, tol)


def build_extended_set(grid: TensorGrid, classification: Classification,
                       ghost_scale: float = 1.0, tol: Optional[float] = None) -> BasisSet:
    """Basis over interior, boundary and exterior cells; linearly dependent on the domain."""
    return _build_set(BasisKind.EXTENDED, grid, classification, classification.extended_centers,
                      ghost_scale, tol)


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------

# (name, global coefficients on 1, x, y, x^2, xy, y^2)
MONOMIALS = [
    ("1", (1, 0, 0, 0, 0, 0)),
    ("x", (0, 1, 0, 0, 0, 0)),
    ("y", (0, 0, 1, 0, 0, 0)),
    ("xy", (0, 0, 0, 0, 1, 0)),
    ("x2", (0, 0, 0, 1, 0, 0)),
    ("y2", (0, 0, 0, 0, 0, 1)),
]
BILINEAR = {"1", "x", "y", "xy"}


class IdentityReport(BaseModel):
    """Max-norm residuals of the reproduction identities on the domain."""

    kind: str
    ghost_scale: float
    cells: int
    residuals: Dict[str, float] = Field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def center_functional(rect: Rect, v: P2Poly) -> float:
    """r_T(v) = v(c_T) - (L^2 v_xx + H^2 v_yy) / 8."""
    H = v.hessian()
    xc, yc = rect.center
    return float(v(xc, yc)) - (rect.width ** 2 * H[0, 0] + rect.height ** 2 * H[1, 1]) / 8.0


def mean_functional(rect: Rect, v: P2Poly) -> float:
    """t_T(v) = mean_T(v) - (L^2 v_xx + H^2 v_yy) / 6."""
    H = v.hessian()
    mean = gauss_rect(rect, 2).mean(v)
    return mean - (rect.width ** 2 * H[0, 0] + rect.height ** 2 * H[1, 1]) / 6.0


def _residual(basis: BasisSet, coeffs: np.ndarray, target: Optional[P2Poly], samples: int) -> float:
    fieldv = field_from_coefficients(basis, coeffs)
    worst = 0.0
    for cell in basis.grid.active_cells:
        x, y = basis.grid.rect(cell).sample(samples)
        diff = fieldv.pieces[cell](x, y)
        if target is not None:
            diff = diff - target(x, y)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def verify_identities(basis: BasisSet, samples: int = 5) -> IdentityReport:
    """Reproduction identities of the extended set.

    For bilinear v: sum v(c_T) phi_T = v and sum mean_T(v) phi_T = v.
    For quadratic v: sum r_T(v) phi_T = v and sum t_T(v) phi_T = v.
    Checkerboard: sum d_T L_T H_T phi_T = 0, reported relative to max |c_T|.
    """
    if basis.kind != BasisKind.EXTENDED:
        raise ValidationError("Identities hold for the extended set only", field="kind",
                              value=basis.kind.value)
    rects = [basis.rect(fn.center) for fn in basis.functions]
    residuals: Dict[str, float] = {}
    for name, coeffs in MONOMIALS:
        v = P2Poly.from_global(coeffs)
        if name in BILINEAR:
            centers = np.array([v(*r.center) for r in rects], dtype=float)
            means = np.array([gauss_rect(r, 2).mean(v) for r in rects])
            residuals[f"center:{name}"] = _residual(basis, centers, v, samples)
            residuals[f"mean:{name}"] = _residual(basis, means, v, samples)
        r = np.array([center_functional(rect, v) for rect in rects])
        t = np.array([mean_functional(rect, v) for rect in rects])
        residuals[f"r:{name}"] = _residual(basis, r, v, samples)
        residuals[f"t:{name}"] = _residual(basis, t, v, samples)

    board = basis.checkerboard_vector()
    residuals["checkerboard"] = _residual(basis, board, None, samples) / float(np.max(np.abs(board)))

    report = IdentityReport(kind=basis.kind.value, ghost_scale=basis.ghost_scale,
                            cells=basis.grid.n_active, residuals=residuals)
    logger.info("Identity check", max_residual=report.max_residual, ghost_scale=basis.ghost_scale)
    return report


def norm_bound_constant(basis: BasisSet) -> float:
    """max over functions, support cells and k in {0, 1, 2} of |phi_K|_{k,T} / h_T^(1-k)."""
    worst = 0.0
    for fn in basis.functions:
        for cell, poly in fn.support.items():
            rect = basis.grid.rect(cell)
            for k in (0, 1, 2):
                worst = max(worst, poly.seminorm(rect, k) / rect.h ** (1 - k))
    return worst
