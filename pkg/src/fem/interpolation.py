"""Quasi-interpolation into the RRM spaces through five-cell mean stencils.

The coefficient of phi_K is a weighted sum of the cell means of v over K and
its four edge neighbours. The weights make the functional coincide with
t_K(v) = mean_K(v) - (L^2 v_xx + H^2 v_yy) / 6 for every quadratic v.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
import structlog

from ..config import settings
from ..core.exceptions import ValidationError
from .basis import BasisKind, BasisSet, mean_functional
from .fields import Coefficients, PiecewiseP2Field, field_from_coefficients
from .mesh import Cell, Patch3x3, TensorGrid
from .polynomial import P2Poly, Rect, gauss_rect, gauss_rects

logger = structlog.get_logger()

Function2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FiveCellStencil:
    """Cells and weights in the order left, right, below, above, center."""

    center: Cell
    cells: Tuple[Cell, Cell, Cell, Cell, Cell]
    rects: Tuple[Rect, Rect, Rect, Rect, Rect]
    weights: Tuple[float, float, float, float, float]

    def apply(self, means: Iterable[float]) -> float:
        return float(np.dot(self.weights, np.fromiter(means, dtype=float, count=5)))

    def functional(self, v: Function2D, order: Optional[int] = None) -> float:
        """lambda_K(v) with Gauss means of v."""
        order = order or settings.interp_quad_order
        return self.apply(gauss_rect(r, order).mean(v) for r in self.rects)


def stencil(patch_: Patch3x3) -> FiveCellStencil:
    """Five-cell stencil of a patch."""
    Lm, L, Lp = patch_.lengths
    Hm, H, Hp = patch_.heights
    sx = Lm + L + Lp
    sy = Hm + H + Hp
    w1 = -L * L / ((Lm + L) * sx)
    w2 = -L * L / ((L + Lp) * sx)
    w3 = -H * H / ((Hm + H) * sy)
    w4 = -H * H / ((H + Hp) * sy)
    w5 = 1.0 - (w1 + w2 + w3 + w4)
    order = ((0, 1), (2, 1), (1, 0), (1, 2), (1, 1))
    cells = tuple(patch_.cells[p][q].index for p, q in order)
    rects = tuple(patch_.cells[p][q].rect for p, q in order)
    return FiveCellStencil(patch_.center, cells, rects, (w1, w2, w3, w4, w5))


def stencil_exactness(patch_: Patch3x3, v: P2Poly) -> float:
    """|lambda_K(v) - t_K(v)| for a quadratic v."""
    s = stencil(patch_)
    return abs(s.functional(v, 2) - mean_functional(patch_.center_rect, v))


def _cell_means(rects: Dict[Cell, Rect], v: Function2D, order: int) -> Dict[Cell, float]:
    """Gauss means of v on many cells with one vectorized evaluation."""
    cells = list(rects)
    bounds = np.array([rects[c].bounds for c in cells])
    X, Y, W = gauss_rects(bounds, order)
    values = np.asarray(v(X, Y), dtype=float)
    means = (W * values).sum(axis=1) / W.sum(axis=1)
    return dict(zip(cells, means))


def _interpolate(basis: BasisSet, v: Function2D, quad_order: Optional[int]) -> Tuple[Coefficients, PiecewiseP2Field]:
    order = quad_order or settings.interp_quad_order
    stencils = [stencil(fn.patch) for fn in basis.functions]
    rects: Dict[Cell, Rect] = {}
    for s in stencils:
        rects.update(zip(s.cells, s.rects))
    means = _cell_means(rects, v, order)
    values = np.array([s.apply(means[c] for c in s.cells) for s in stencils])
    coeffs = Coefficients(basis, values)
    logger.debug(f"Interpolated into {basis.kind.value} space", functions=len(basis), cells=len(rects))
    return coeffs, field_from_coefficients(basis, coeffs)


def interpolate_h0(basis: BasisSet, v: Function2D,
                   quad_order: Optional[int] = None) -> Tuple[Coefficients, PiecewiseP2Field]:
    """Quasi-interpolation into the homogeneous-boundary space.

    v must be defined on the domain; every stencil of an interior function
    stays inside it.
    """
    if basis.kind != BasisKind.INTERIOR:
        raise ValidationError("interpolate_h0 needs the interior basis", field="kind",
                              value=basis.kind.value)
    return _interpolate(basis, v, quad_order)


def interpolate_extended(basis: BasisSet, v: Function2D,
                         quad_order: Optional[int] = None) -> Tuple[Coefficients, PiecewiseP2Field]:
    """Quasi-interpolation into the extended space.

    v must be defined on the whole extended lattice, ghost cells included.
    """
    if basis.kind != BasisKind.EXTENDED:
        raise ValidationError("interpolate_extended needs the extended basis", field="kind",
                              value=basis.kind.value)
    return _interpolate(basis, v, quad_order)


def eligible_cells(basis: BasisSet) -> list:
    """Active cells covered by nine functions of the basis."""
    return [cell for cell, ids in basis.covering.items() if len(ids) == 9]


def reproduction_residual(basis: BasisSet, v: P2Poly, cells=None, samples: int = 5) -> float:
    """Max |Pi v - v| over the given cells (default: the nine-fold covered cells)."""
    _, fieldv = _interpolate(basis, v, 3)
    cells = eligible_cells(basis) if cells is None else cells
    worst = 0.0
    for cell in cells:
        x, y = basis.grid.rect(cell).sample(samples)
        worst = max(worst, float(np.max(np.abs(fieldv.pieces[cell](x, y) - v(x, y)))))
    return worst


def projection_defect(basis: BasisSet, center: Cell, quad_order: Optional[int] = None) -> float:
    """max |Pi phi_K - e_K| over the coefficient vector; zero would mean Pi fixes phi_K."""
    k = basis.index[center]
    unit = np.zeros(len(basis))
    unit[k] = 1.0
    fieldv = field_from_coefficients(basis, unit)
    coeffs, _ = _interpolate(basis, fieldv.value, quad_order)
    return float(np.max(np.abs(coeffs.values - unit)))


def lattice_locator(grid: TensorGrid, ghost_scale: float = 1.0):
    """Map points of the extended lattice to (i, j) cell indices, ghosts included."""
    ex, ey = grid.extended_lines(ghost_scale)
    offset = 2

    def locate(x, y):
        i = np.clip(np.searchsorted(ex, x, side="right") - 1, 0, len(ex) - 2) - offset
        j = np.clip(np.searchsorted(ey, y, side="right") - 1, 0, len(ey) - 2) - offset
        return i, j

    return locate


def stability_constants(basis: BasisSet, v: Function2D, quad_order: Optional[int] = None) -> Dict[int, float]:
    """For k = 0, 1, 2: max_T h_T^k |Pi v|_{k,T} / ||v||_{0,Delta_T} with Delta_T
    the 5x5 block of lattice cells around T."""
    if basis.kind != BasisKind.EXTENDED:
        raise ValidationError("Stability is measured for the extended basis", field="kind",
                              value=basis.kind.value)
    order = quad_order or settings.interp_quad_order
    _, fieldv = _interpolate(basis, v, order)

    # L2 norms of v on every lattice cell of the extended lattice
    grid = basis.grid
    cells = [(i, j) for i in range(-2, grid.nx + 2) for j in range(-2, grid.ny + 2)]
    bounds = np.array([grid.lattice_rect(c, basis.ghost_scale).bounds for c in cells])
    X, Y, W = gauss_rects(bounds, order)
    sq = (W * np.asarray(v(X, Y), dtype=float) ** 2).sum(axis=1)
    local_sq = dict(zip(cells, sq))

    worst = {0: 0.0, 1: 0.0, 2: 0.0}
    for cell in grid.active_cells:
        i, j = cell
        norm = np.sqrt(sum(local_sq[(i + a, j + b)] for a in range(-2, 3) for b in range(-2, 3)))
        if norm == 0.0:
            continue
        rect = grid.rect(cell)
        piece = fieldv.pieces[cell]
        for k in (0, 1, 2):
            worst[k] = max(worst[k], rect.h ** k * piece.seminorm(rect, k) / norm)
    return worst
