"""Tensor-product rectangular grids: construction, classification and 3x3 patches.

A grid is a pair of strictly increasing coordinate arrays plus an activity
mask over the resulting lattice; the domain is the union of active cells.
Cells, vertices and edges are addressed by lattice indices:

    cell (i, j)       [xs[i], xs[i+1]] x [ys[j], ys[j+1]]
    vertex (i, j)     (xs[i], ys[j])
    edge ("h", i, j)  horizontal, from vertex (i, j) to (i+1, j)
    edge ("v", i, j)  vertical, from vertex (i, j) to (i, j+1)

Cell indices may leave the lattice by up to two layers; those ghost cells
take the width (height) of the nearest real column (row) times a ghost scale.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
import structlog

from ..config import settings
from ..core.exceptions import CornerAdjacencyViolation, MeshError, ValidationError
from .polynomial import Rect

logger = structlog.get_logger()

Cell = Tuple[int, int]
Vertex = Tuple[int, int]
Edge = Tuple[str, int, int]

GHOST_LAYERS = 2

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
_EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)


class DomainKind(str, Enum):
    SQUARE = "square"
    LSHAPE = "lshape"
    CUSTOM = "custom"


class CornerKind(str, Enum):
    CONVEX = "convex"
    CONCAVE = "concave"


@dataclass(frozen=True, eq=False)
class TensorGrid:
    """Active subset of a tensor-product lattice of rectangles."""

    xs: np.ndarray
    ys: np.ndarray
    active: np.ndarray
    domain_kind: DomainKind = DomainKind.CUSTOM

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float)
        active = np.array(self.active, dtype=bool)
        if xs.ndim != 1 or ys.ndim != 1 or len(xs) < 2 or len(ys) < 2:
            raise MeshError("Coordinate arrays need at least two entries")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise MeshError("Coordinates must be strictly increasing")
        if active.shape != (len(xs) - 1, len(ys) - 1):
            raise MeshError("Activity mask does not match the lattice",
                            {"mask": active.shape, "lattice": (len(xs) - 1, len(ys) - 1)})
        if not active.any():
            raise MeshError("Grid has no active cell")
        _, n_parts = ndimage.label(active, structure=_FOUR_CONNECTED)
        if n_parts != 1:
            raise MeshError(f"Active cells form {n_parts} edge-connected components")
        # holes: inactive cells (plus the outside) must form one 8-connected region
        _, n_outside = ndimage.label(np.pad(~active, 1, constant_values=True),
                                     structure=_EIGHT_CONNECTED)
        if n_outside != 1:
            raise MeshError("Domain is not simply connected")
        for arr in (xs, ys, active):
            arr.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "active", active)
        object.__setattr__(self, "domain_kind", DomainKind(self.domain_kind))

    @property
    def nx(self) -> int:
        return len(self.xs) - 1

    @property
    def ny(self) -> int:
        return len(self.ys) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.xs)

    @property
    def heights(self) -> np.ndarray:
        return np.diff(self.ys)

    @cached_property
    def active_cells(self) -> List[Cell]:
        """Active cells in lexicographic (i, j) order."""
        return [(int(i), int(j)) for i, j in np.argwhere(self.active)]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @cached_property
    def h(self) -> float:
        """Largest max(L, H) over active cells."""
        L = self.widths[:, None] * np.ones(self.ny)[None, :]
        H = np.ones(self.nx)[:, None] * self.heights[None, :]
        return float(np.max(np.maximum(L, H)[self.active]))

    def in_lattice(self, cell: Cell) -> bool:
        i, j = cell
        return 0 <= i < self.nx and 0 <= j < self.ny

    def is_active(self, cell: Cell) -> bool:
        return self.in_lattice(cell) and bool(self.active[cell[0], cell[1]])

    def extended_lines(self, ghost_scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        """Grid lines including two ghost layers on every side."""
        if not ghost_scale > 0:
            raise ValidationError("Ghost scale must be positive", field="ghost_scale", value=ghost_scale)

        def extend(lines, sizes):
            lo, hi = sizes[0] * ghost_scale, sizes[-1] * ghost_scale
            return np.concatenate([
                [lines[0] - 2 * lo, lines[0] - lo], lines, [lines[-1] + hi, lines[-1] + 2 * hi],
            ])

        return extend(self.xs, self.widths), extend(self.ys, self.heights)

    def rect(self, cell: Cell) -> Rect:
        """Geometry of a lattice cell (active or not)."""
        if not self.in_lattice(cell):
            raise MeshError(f"Cell {cell} is outside the lattice")
        i, j = cell
        return Rect(self.xs[i], self.ys[j], self.xs[i + 1], self.ys[j + 1])

    def lattice_rect(self, cell: Cell, ghost_scale: float = 1.0) -> Rect:
        """Geometry of a cell of the lattice extended by two ghost layers."""
        i, j = cell
        if not (-GHOST_LAYERS <= i < self.nx + GHOST_LAYERS and -GHOST_LAYERS <= j < self.ny + GHOST_LAYERS):
            raise MeshError(f"Cell {cell} is outside the extended lattice")
        if self.in_lattice(cell):
            return self.rect(cell)
        ex, ey = self.extended_lines(ghost_scale)
        i += GHOST_LAYERS
        j += GHOST_LAYERS
        return Rect(ex[i], ey[j], ex[i + 1], ey[j + 1])

    def locate(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        """Lattice cell indices containing the points; boundary points go to the lower cell."""
        i = np.clip(np.searchsorted(self.xs, np.asarray(x, dtype=float), side="right") - 1, 0, self.nx - 1)
        j = np.clip(np.searchsorted(self.ys, np.asarray(y, dtype=float), side="right") - 1, 0, self.ny - 1)
        return i, j

    @staticmethod
    def cell_vertices(cell: Cell) -> List[Vertex]:
        """Vertex ids of a cell: lower-left, lower-right, upper-left, upper-right."""
        i, j = cell
        return [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]

    def bounds_array(self, cells: Sequence[Cell]) -> np.ndarray:
        """(k, 4) array of (x0, y0, x1, y1) rows for in-lattice cells."""
        idx = np.asarray(cells, dtype=int).reshape(-1, 2)
        return np.column_stack([
            self.xs[idx[:, 0]], self.ys[idx[:, 1]], self.xs[idx[:, 0] + 1], self.ys[idx[:, 1] + 1],
        ])


@dataclass(frozen=True)
class CornerNode:
    vertex: Vertex
    kind: CornerKind


@dataclass(frozen=True, eq=False)
class Classification:
    """Topological classification of a grid."""

    grid: TensorGrid
    interior_cells: FrozenSet[Cell]
    boundary_cells: FrozenSet[Cell]
    exterior_cells: FrozenSet[Cell]
    interior_vertices: FrozenSet[Vertex]
    boundary_vertices: FrozenSet[Vertex]
    interior_edges: FrozenSet[Edge]
    boundary_edges: FrozenSet[Edge]
    corner_nodes: Tuple[CornerNode, ...]
    corner_edges: FrozenSet[Edge]
    non_corner_boundary_edges: FrozenSet[Edge]
    corner_conflicts: Tuple[Cell, ...] = ()

    @cached_property
    def extended_centers(self) -> List[Cell]:
        """Interior, boundary and exterior cells, sorted."""
        return sorted(self.interior_cells | self.boundary_cells | self.exterior_cells)

    def summary(self) -> Dict[str, int]:
        return {
            "interior_cells": len(self.interior_cells),
            "boundary_cells": len(self.boundary_cells),
            "exterior_cells": len(self.exterior_cells),
            "corner_nodes": len(self.corner_nodes),
            "boundary_edges": len(self.boundary_edges),
        }


def _edge_endpoints(edge: Edge) -> Tuple[Vertex, Vertex]:
    kind, i, j = edge
    if kind == "h":
        return (i, j), (i + 1, j)
    return (i, j), (i, j + 1)


def classify(grid: TensorGrid, enforce_corner_separation: bool = True) -> Classification:
    """Classify cells, vertices and edges; corners must not share a cell."""
    padded = np.pad(grid.active, 1)

    # per vertex: which of the four surrounding cells are active
    ll = padded[:-1, :-1]
    lr = padded[1:, :-1]
    ul = padded[:-1, 1:]
    ur = padded[1:, 1:]
    count = ll.astype(int) + lr + ul + ur
    diagonal = (ll & ur & ~lr & ~ul) | (lr & ul & ~ll & ~ur)
    if diagonal.any():
        raise MeshError("Domain touches itself at a vertex",
                        {"vertices": [tuple(map(int, v)) for v in np.argwhere(diagonal)]})

    interior_vertices = frozenset((int(i), int(j)) for i, j in np.argwhere(count == 4))
    boundary_vertices = frozenset((int(i), int(j)) for i, j in np.argwhere((count > 0) & (count < 4)))
    corner_nodes = tuple(
        CornerNode((int(i), int(j)), CornerKind.CONVEX if count[i, j] == 1 else CornerKind.CONCAVE)
        for i, j in np.argwhere((count == 1) | (count == 3))
    )
    corner_vertices = {c.vertex for c in corner_nodes}

    # horizontal edges: cells below and above; vertical edges: cells left and right
    below, above = padded[1:-1, :-1], padded[1:-1, 1:]
    left, right = padded[:-1, 1:-1], padded[1:, 1:-1]
    interior_edges = set()
    boundary_edges = set()
    for kind, a, b in (("h", below, above), ("v", left, right)):
        for i, j in np.argwhere(a & b):
            interior_edges.add((kind, int(i), int(j)))
        for i, j in np.argwhere(a ^ b):
            boundary_edges.add((kind, int(i), int(j)))
    corner_edges = frozenset(e for e in boundary_edges if corner_vertices & set(_edge_endpoints(e)))

    interior_cells = []
    boundary_cells = []
    conflicts = []
    for cell in grid.active_cells:
        verts = grid.cell_vertices(cell)
        if all(v in interior_vertices for v in verts):
            interior_cells.append(cell)
        else:
            boundary_cells.append(cell)
        if sum(v in corner_vertices for v in verts) >= 2:
            conflicts.append(cell)

    # exterior cells: one-cell dilation of the domain minus the domain
    dilated = ndimage.binary_dilation(padded, structure=_EIGHT_CONNECTED)
    exterior_cells = frozenset(
        (int(i) - 1, int(j) - 1) for i, j in np.argwhere(dilated & ~padded)
    )

    if conflicts:
        message = f"{len(conflicts)} cells contain two corner nodes"
        if enforce_corner_separation:
            raise CornerAdjacencyViolation(message, conflicts)
        logger.warning(message, cells=conflicts[:5])

    classification = Classification(
        grid=grid,
        interior_cells=frozenset(interior_cells),
        boundary_cells=frozenset(boundary_cells),
        exterior_cells=exterior_cells,
        interior_vertices=interior_vertices,
        boundary_vertices=boundary_vertices,
        interior_edges=frozenset(interior_edges),
        boundary_edges=frozenset(boundary_edges),
        corner_nodes=corner_nodes,
        corner_edges=corner_edges,
        non_corner_boundary_edges=frozenset(boundary_edges) - corner_edges,
        corner_conflicts=tuple(conflicts),
    )
    logger.debug("Classified grid", **classification.summary())
    return classification


# ---------------------------------------------------------------------------
# Patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PatchCell:
    index: Cell
    rect: Rect
    real: bool


@dataclass(frozen=True, eq=False)
class Patch3x3:
    """Nine cells around a center cell.

    lengths = (L_-1, L, L_1) and heights = (H_-1, H, H_1); cells[p][q] is the
    cell in column p and row q of the patch, p, q in {0, 1, 2}.
    """

    center: Cell
    lengths: Tuple[float, float, float]
    heights: Tuple[float, float, float]
    cells: Tuple[Tuple[PatchCell, ...], ...]

    def __post_init__(self):
        if min(self.lengths) <= 0 or min(self.heights) <= 0:
            raise MeshError(f"Patch at {self.center} has a non-positive cell size")

    @property
    def xlines(self) -> np.ndarray:
        """a_0 .. a_3."""
        x0 = self.cells[0][0].rect.x0
        return x0 + np.concatenate([[0.0], np.cumsum(self.lengths)])

    @property
    def ylines(self) -> np.ndarray:
        """b_0 .. b_3."""
        y0 = self.cells[0][0].rect.y0
        return y0 + np.concatenate([[0.0], np.cumsum(self.heights)])

    @property
    def center_rect(self) -> Rect:
        return self.cells[1][1].rect

    def iter_cells(self):
        for p in range(3):
            for q in range(3):
                yield p, q, self.cells[p][q]

    @classmethod
    def from_sizes(cls, lengths: Sequence[float], heights: Sequence[float],
                   origin: Tuple[float, float] = (0.0, 0.0), center: Cell = (1, 1),
                   real: Optional[np.ndarray] = None) -> "Patch3x3":
        """Free-standing patch with the given sizes, lower-left corner at origin."""
        lengths = tuple(float(v) for v in lengths)
        heights = tuple(float(v) for v in heights)
        if len(lengths) != 3 or len(heights) != 3 or min(lengths + heights) <= 0:
            raise MeshError("A patch needs three positive lengths and three positive heights")
        xl = origin[0] + np.concatenate([[0.0], np.cumsum(lengths)])
        yl = origin[1] + np.concatenate([[0.0], np.cumsum(heights)])
        real = np.ones((3, 3), dtype=bool) if real is None else np.asarray(real, dtype=bool)
        ci, cj = center
        cells = tuple(
            tuple(PatchCell((ci - 1 + p, cj - 1 + q), Rect(xl[p], yl[q], xl[p + 1], yl[q + 1]), bool(real[p, q]))
                  for q in range(3))
            for p in range(3)
        )
        return cls(center, lengths, heights, cells)


def patch(grid: TensorGrid, classification: Classification, cell: Cell,
          ghost_scale: float = 1.0) -> Patch3x3:
    """The 3x3 patch centred at an active cell or a registered exterior cell."""
    cell = (int(cell[0]), int(cell[1]))
    if not (grid.is_active(cell) or cell in classification.exterior_cells):
        raise MeshError(f"Cell {cell} is neither active nor an exterior cell of the grid")
    i, j = cell
    cells = tuple(
        tuple(
            PatchCell((i - 1 + p, j - 1 + q),
                      grid.lattice_rect((i - 1 + p, j - 1 + q), ghost_scale),
                      grid.is_active((i - 1 + p, j - 1 + q)))
            for q in range(3)
        )
        for p in range(3)
    )
    lengths = tuple(cells[p][1].rect.width for p in range(3))
    heights = tuple(cells[1][q].rect.height for q in range(3))
    return Patch3x3(cell, lengths, heights, cells)


def regularity(grid: TensorGrid) -> float:
    """max over active cells of h_K / rho_K = 2 max(L, H) / min(L, H)."""
    L = grid.widths[:, None] * np.ones(grid.ny)[None, :]
    H = np.ones(grid.nx)[:, None] * grid.heights[None, :]
    ratio = 2.0 * np.maximum(L, H) / np.minimum(L, H)
    value = float(np.max(ratio[grid.active]))
    if value > settings.gamma0:
        logger.warning(f"Grid shape regularity {value:.3f} exceeds gamma0={settings.gamma0}")
    return value


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

Extent = Tuple[float, float, float, float]
UNIT_SQUARE: Extent = (0.0, 0.0, 1.0, 1.0)


def _check_extent(extent: Extent) -> Extent:
    x0, y0, x1, y1 = (float(v) for v in extent)
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("Extent must be (xmin, ymin, xmax, ymax) with positive size",
                              field="extent", value=extent)
    return x0, y0, x1, y1


def build_uniform(extent: Extent = UNIT_SQUARE, n: int = 4) -> TensorGrid:
    """n x n congruent cells on the rectangle extent."""
    if n < 1:
        raise ValidationError("Uniform grid needs n >= 1", field="n", value=n)
    x0, y0, x1, y1 = _check_extent(extent)
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    return TensorGrid(xs, ys, np.ones((n, n), dtype=bool), DomainKind.SQUARE)


def _pattern_lines(start: float, stop: float, macro: float, ratio: float) -> np.ndarray:
    count = int(round((stop - start) / macro))
    if count < 1 or not np.isclose(count * macro, stop - start):
        raise ValidationError("Extent is not a whole number of macro-cells",
                              field="extent", value=(start, stop))
    lines = []
    for k in range(count):
        a = start + k * macro
        lines.extend([a, a + ratio * macro])
    lines.append(stop)
    return np.array(lines)


def build_pattern(level: int, ratio: Optional[float] = None, extent: Extent = UNIT_SQUARE) -> TensorGrid:
    """Macro-cells of size 2^-level, each split at ratio in both directions.

    The resulting h is max(ratio, 1 - ratio) * 2^-level.
    """
    ratio = settings.pattern_ratio if ratio is None else float(ratio)
    if level < 1:
        raise ValidationError("Pattern level must be at least 1", field="level", value=level)
    if not 0.0 < ratio < 1.0:
        raise ValidationError("Pattern ratio must lie in (0, 1)", field="ratio", value=ratio)
    x0, y0, x1, y1 = _check_extent(extent)
    macro = 2.0 ** -level
    xs = _pattern_lines(x0, x1, macro, ratio)
    ys = _pattern_lines(y0, y1, macro, ratio)
    return TensorGrid(xs, ys, np.ones((len(xs) - 1, len(ys) - 1), dtype=bool), DomainKind.SQUARE)


def build_lshape(resolution: int, kind: str = "uniform", ratio: Optional[float] = None) -> TensorGrid:
    """(0, 2)^2 minus [1, 2]^2.

    For kind "uniform" resolution is the number of cells per unit length; for
    kind "pattern" it is the pattern level.
    """
    extent = (0.0, 0.0, 2.0, 2.0)
    if kind == "uniform":
        if resolution < 1:
            raise ValidationError("L-shape needs at least one cell per unit", field="resolution",
                                  value=resolution)
        base = build_uniform(extent, 2 * resolution)
    elif kind == "pattern":
        base = build_pattern(resolution, ratio, extent)
    else:
        raise ValidationError(f"Unknown mesh kind {kind}", field="kind", value=kind)

    xc = 0.5 * (base.xs[:-1] + base.xs[1:])
    yc = 0.5 * (base.ys[:-1] + base.ys[1:])
    removed = (xc[:, None] > 1.0) & (yc[None, :] > 1.0)
    return TensorGrid(base.xs, base.ys, ~removed, DomainKind.LSHAPE)


def build_grid(domain: str, mesh_kind: str, level: int, ratio: Optional[float] = None) -> TensorGrid:
    """Grid of a convergence level: h = 2^-level (uniform) or ratio * 2^-level (pattern)."""
    if domain == DomainKind.SQUARE.value:
        if mesh_kind == "uniform":
            return build_uniform(UNIT_SQUARE, 2 ** level)
        if mesh_kind == "pattern":
            return build_pattern(level, ratio)
        raise ValidationError(f"Unknown mesh kind {mesh_kind}", field="mesh", value=mesh_kind)
    if domain == DomainKind.LSHAPE.value:
        resolution = 2 ** level if mesh_kind == "uniform" else level
        return build_lshape(resolution, mesh_kind, ratio)
    raise ValidationError(f"Unknown domain {domain}", field="domain", value=domain)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

def dump_grid(grid: TensorGrid) -> str:
    """Coordinates followed by the activity bitmap, top row first."""
    lines = [
        f"kind {grid.domain_kind.value}",
        "xs " + " ".join(repr(float(x)) for x in grid.xs),
        "ys " + " ".join(repr(float(y)) for y in grid.ys),
    ]
    for j in reversed(range(grid.ny)):
        lines.append("".join("1" if grid.active[i, j] else "0" for i in range(grid.nx)))
    return "\n".join(lines) + "\n"


def load_grid(text: str) -> TensorGrid:
    rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if len(rows) < 4 or not rows[0].startswith("kind ") or not rows[1].startswith("xs ") \
            or not rows[2].startswith("ys "):
        raise MeshError("Malformed grid text")
    kind = DomainKind(rows[0].split()[1])
    xs = np.array([float(v) for v in rows[1].split()[1:]])
    ys = np.array([float(v) for v in rows[2].split()[1:]])
    bitmap = rows[3:]
    if len(bitmap) != len(ys) - 1 or any(len(r) != len(xs) - 1 for r in bitmap):
        raise MeshError("Bitmap does not match the coordinates")
    active = np.array([[ch == "1" for ch in row] for row in reversed(bitmap)]).T
    return TensorGrid(xs, ys, active, kind)
