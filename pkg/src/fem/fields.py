"""Coefficient vectors and the piecewise quadratic fields they define."""

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import ValidationError
from .mesh import Cell, TensorGrid
from .polynomial import P2Poly, evaluate_stack, gradient_stack, hessian_stack

if TYPE_CHECKING:
    from .basis import BasisSet


@dataclass(frozen=True, eq=False)
class Coefficients:
    """One real per basis function, indexed like basis.functions."""

    basis: "BasisSet"
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != len(self.basis):
            raise ValidationError("Coefficient count does not match the basis size",
                                  field="values", value=len(values))
        object.__setattr__(self, "values", values)

    def __getitem__(self, center: Cell) -> float:
        return float(self.values[self.basis.index[center]])

    def as_dict(self) -> Dict[Cell, float]:
        return {fn.center: float(c) for fn, c in zip(self.basis.functions, self.values)}


@dataclass(frozen=True, eq=False)
class PiecewiseP2Field:
    """A quadratic on every active cell of a grid."""

    grid: TensorGrid
    pieces: Dict[Cell, P2Poly]

    @cached_property
    def _stack(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cells = self.grid.active_cells
        lookup = np.full((self.grid.nx, self.grid.ny), -1, dtype=int)
        for k, (i, j) in enumerate(cells):
            lookup[i, j] = k
        coeffs = np.array([self.pieces[c].coeffs for c in cells])
        centers = np.array([self.pieces[c].center for c in cells])
        scales = np.array([self.pieces[c].scale for c in cells])
        return lookup, coeffs, centers, scales

    def stack(self, cells: Optional[Sequence[Cell]] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(coeffs, centers, scales) for the given cells, default grid.active_cells."""
        lookup, coeffs, centers, scales = self._stack
        if cells is None:
            return coeffs, centers, scales
        idx = np.array([lookup[c] for c in cells])
        return coeffs[idx], centers[idx], scales[idx]

    def _pieces_at(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i, j = self.grid.locate(x, y)
        lookup, coeffs, centers, scales = self._stack
        idx = lookup[i, j]
        if np.any(idx < 0):
            raise ValidationError("Point outside the domain of the field")
        return x, y, coeffs[idx], centers[idx], scales[idx]

    def value(self, x, y) -> np.ndarray:
        x, y, c, ctr, s = self._pieces_at(x, y)
        shape = x.shape
        return evaluate_stack(c.reshape(-1, 6), ctr.reshape(-1, 2), s.reshape(-1),
                              x.reshape(-1, 1), y.reshape(-1, 1)).reshape(shape)

    __call__ = value

    def gradient(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        x, y, c, ctr, s = self._pieces_at(x, y)
        shape = x.shape
        gx, gy = gradient_stack(c.reshape(-1, 6), ctr.reshape(-1, 2), s.reshape(-1),
                                x.reshape(-1, 1), y.reshape(-1, 1))
        return gx.reshape(shape), gy.reshape(shape)

    def hessian(self, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x, y, c, ctr, s = self._pieces_at(x, y)
        shape = x.shape
        hxx, hxy, hyy = hessian_stack(c.reshape(-1, 6), s.reshape(-1))
        return hxx.reshape(shape), hxy.reshape(shape), hyy.reshape(shape)

    def __sub__(self, other: "PiecewiseP2Field") -> "PiecewiseP2Field":
        return PiecewiseP2Field(self.grid, {c: self.pieces[c] - other.pieces[c] for c in self.pieces})

    def __add__(self, other: "PiecewiseP2Field") -> "PiecewiseP2Field":
        return PiecewiseP2Field(self.grid, {c: self.pieces[c] + other.pieces[c] for c in self.pieces})

    def max_abs_on_cells(self, cells: Sequence[Cell], samples: int = 5) -> float:
        """Max |field| over an n x n sample of each listed cell."""
        worst = 0.0
        for cell in cells:
            x, y = self.grid.rect(cell).sample(samples)
            worst = max(worst, float(np.max(np.abs(self.pieces[cell](x, y)))))
        return worst


def field_from_coefficients(basis: "BasisSet", coefficients) -> PiecewiseP2Field:
    """Sum c_K phi_K cell by cell; cells no function covers carry the zero quadratic."""
    values = coefficients.values if isinstance(coefficients, Coefficients) else np.asarray(coefficients, float)
    if len(values) != len(basis):
        raise ValidationError("Coefficient count does not match the basis size",
                              field="coefficients", value=len(values))
    grid = basis.grid
    pieces: Dict[Cell, P2Poly] = {}
    for cell in grid.active_cells:
        ids: List[int] = basis.covering.get(cell, [])
        if not ids:
            pieces[cell] = P2Poly.zero(grid.rect(cell))
            continue
        first = basis.functions[ids[0]].support[cell]
        total = np.zeros(6)
        for k in ids:
            total += values[k] * basis.functions[k].support[cell].coeffs
        pieces[cell] = P2Poly(total, first.center, first.scale)
    return PiecewiseP2Field(grid, pieces)
