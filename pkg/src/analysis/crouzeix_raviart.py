"""Crouzeix-Raviart functions on a diagonal-split square mesh.

Used to exhibit families that do admit projective local interpolations:
midpoint values, edge means, and L2 duals on small diamonds around a quarter
point of each edge. Integrals over a diamond are computed by clipping it
against every triangle it meets and integrating each convex piece.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from ..core.exceptions import DegenerateSubdomain, ValidationError
from .projection import (
    DualFunctional,
    LocalBasisFamily,
    Selection,
    Subdomain,
    build_dual_functionals,
    duality_defect,
)

logger = structlog.get_logger()

# Symmetric 6-point rule on the reference triangle, exact for degree 4
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
TRIANGLE_RULE = (
    np.array([
        [_A1, _A1], [1 - 2 * _A1, _A1], [_A1, 1 - 2 * _A1],
        [_A2, _A2], [1 - 2 * _A2, _A2], [_A2, 1 - 2 * _A2],
    ]),
    np.array([_W1, _W1, _W1, _W2, _W2, _W2]),
)

VARIANTS = ("S1", "S2", "S3")


@dataclass(frozen=True, eq=False)
class CRMesh:
    """Unit square of n x n squares, each split from lower-left to upper-right."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("CR mesh needs n >= 1", field="n", value=self.n)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def vertex_id(self, i: int, j: int) -> int:
        return i + (self.n + 1) * j

    @cached_property
    def vertices(self) -> np.ndarray:
        g = np.linspace(0.0, 1.0, self.n + 1)
        return np.array([[g[i], g[j]] for j in range(self.n + 1) for i in range(self.n + 1)])

    @cached_property
    def triangles(self) -> np.ndarray:
        """Counter-clockwise vertex triples."""
        tris = []
        for j in range(self.n):
            for i in range(self.n):
                bl, br = self.vertex_id(i, j), self.vertex_id(i + 1, j)
                tl, tr = self.vertex_id(i, j + 1), self.vertex_id(i + 1, j + 1)
                tris.append((bl, br, tr))
                tris.append((bl, tr, tl))
        return np.array(tris)

    @cached_property
    def _edges(self) -> Tuple[List[Tuple[int, int]], Dict[Tuple[int, int], int], np.ndarray]:
        edges: List[Tuple[int, int]] = []
        index: Dict[Tuple[int, int], int] = {}
        tri_edges = np.zeros((len(self.triangles), 3), dtype=int)
        for t, tri in enumerate(self.triangles):
            for m in range(3):
                key = tuple(sorted((int(tri[(m + 1) % 3]), int(tri[(m + 2) % 3]))))
                if key not in index:
                    index[key] = len(edges)
                    edges.append(key)
                tri_edges[t, m] = index[key]
        return edges, index, tri_edges

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return self._edges[0]

    @property
    def edge_index(self) -> Dict[Tuple[int, int], int]:
        return self._edges[1]

    @property
    def tri_edges(self) -> np.ndarray:
        """tri_edges[t, m] is the edge of triangle t opposite its vertex m."""
        return self._edges[2]

    @cached_property
    def edge_triangles(self) -> List[List[int]]:
        owners: List[List[int]] = [[] for _ in self.edges]
        for t, row in enumerate(self.tri_edges):
            for e in row:
                owners[e].append(t)
        return owners

    @cached_property
    def midpoints(self) -> np.ndarray:
        return np.array([0.5 * (self.vertices[a] + self.vertices[b]) for a, b in self.edges])

    @cached_property
    def _inverse_maps(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        T = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)
        return np.linalg.inv(T)

    @property
    def size(self) -> int:
        return len(self.edges)

    def barycentric(self, points: np.ndarray, tris: np.ndarray) -> np.ndarray:
        """(m, 3) barycentric coordinates of points in the given triangles."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tris = np.asarray(tris, dtype=int).reshape(-1)
        origin = self.vertices[self.triangles[tris, 0]]
        local = np.einsum("mij,mj->mi", self._inverse_maps[tris], points - origin)
        return np.column_stack([1.0 - local.sum(axis=1), local])

    def edge_kind(self, e: int) -> str:
        a, b = self.vertices[list(self.edges[e])]
        if np.isclose(a[1], b[1]):
            return "horizontal"
        if np.isclose(a[0], b[0]):
            return "vertical"
        return "diagonal"

    def edge_label(self, e: int) -> str:
        a, b = self.vertices[list(self.edges[e])]
        return f"({a[0]:g},{a[1]:g})-({b[0]:g},{b[1]:g})"

    def is_interior_edge(self, e: int) -> bool:
        return len(self.edge_triangles[e]) == 2


@dataclass(frozen=True, eq=False)
class CRFunction:
    """sum_e c_e phi_e with phi_e = 1 - 2 lambda_(vertex opposite e) on each triangle."""

    mesh: CRMesh
    coefficients: np.ndarray

    def evaluate(self, points: np.ndarray, tris: np.ndarray) -> np.ndarray:
        lam = self.mesh.barycentric(points, tris)
        c = self.coefficients[self.mesh.tri_edges[np.asarray(tris, dtype=int)]]
        return np.sum(c * (1.0 - 2.0 * lam), axis=1)

    @classmethod
    def unit(cls, mesh: CRMesh, e: int) -> "CRFunction":
        c = np.zeros(mesh.size)
        c[e] = 1.0
        return cls(mesh, c)


class CRFamily(LocalBasisFamily):
    """Crouzeix-Raviart basis of a CRMesh, one function per edge."""

    def __init__(self, mesh: CRMesh):
        self.mesh = mesh

    @property
    def size(self) -> int:
        return self.mesh.size

    def candidates(self, region: Subdomain) -> List[int]:
        return sorted({int(e) for t in region.owner_keys for e in self.mesh.tri_edges[t]})

    def evaluate(self, k: int, region: Subdomain) -> np.ndarray:
        tris = np.asarray(region.owner_keys, dtype=int)[region.owners]
        rows = self.mesh.tri_edges[tris]
        values = np.zeros(len(tris))
        hit = rows == k
        inside = hit.any(axis=1)
        if inside.any():
            lam = self.mesh.barycentric(region.points[inside], tris[inside])
            m = np.argmax(hit[inside], axis=1)
            values[inside] = 1.0 - 2.0 * lam[np.arange(len(m)), m]
        return values


# ---------------------------------------------------------------------------
# Polygon clipping and quadrature
# ---------------------------------------------------------------------------

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def clip_convex(subject: np.ndarray, clipper: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against a counter-clockwise convex polygon."""
    output = [tuple(p) for p in subject]
    m = len(clipper)
    for c in range(m):
        a, b = clipper[c], clipper[(c + 1) % m]
        source, output = output, []
        if not source:
            break
        prev = source[-1]
        prev_in = _cross(a, b, prev) >= 0.0
        for cur in source:
            cur_in = _cross(a, b, cur) >= 0.0
            if cur_in != prev_in:
                d1 = _cross(a, b, prev)
                d2 = _cross(a, b, cur)
                s = d1 / (d1 - d2)
                output.append((prev[0] + s * (cur[0] - prev[0]), prev[1] + s * (cur[1] - prev[1])))
            if cur_in:
                output.append(tuple(cur))
            prev, prev_in = cur, cur_in
    return np.array(output).reshape(-1, 2)


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _fan_rule(poly: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    ref_pts, ref_w = TRIANGLE_RULE
    points, weights = [], []
    for k in range(1, len(poly) - 1):
        p0, p1, p2 = poly[0], poly[k], poly[k + 1]
        area = 0.5 * abs(_cross(p0, p1, p2))
        if area <= 0.0:
            continue
        points.append(p0 + np.outer(ref_pts[:, 0], p1 - p0) + np.outer(ref_pts[:, 1], p2 - p0))
        weights.append(ref_w * area)
    if not points:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(points), np.concatenate(weights)


def polygon_subdomain(mesh: CRMesh, polygon: np.ndarray) -> Subdomain:
    """Quadrature of a convex polygon split along the triangles of the mesh."""
    polygon = np.asarray(polygon, dtype=float)
    if polygon_area(polygon) < 0:
        polygon = polygon[::-1]
    lo, hi = polygon.min(axis=0), polygon.max(axis=0)
    keys, pts, wts, owners = [], [], [], []
    P = mesh.vertices[mesh.triangles]
    for t in range(len(mesh.triangles)):
        tri = P[t]
        if np.any(tri.max(axis=0) < lo) or np.any(tri.min(axis=0) > hi):
            continue
        piece = clip_convex(polygon, tri)
        if len(piece) < 3 or abs(polygon_area(piece)) <= 1e-12 * abs(polygon_area(polygon)):
            continue
        p, w = _fan_rule(piece)
        if len(w) == 0:
            continue
        owners.append(np.full(len(w), len(keys)))
        keys.append(t)
        pts.append(p)
        wts.append(w)
    if not keys:
        raise DegenerateSubdomain("Polygon does not meet the mesh")
    return Subdomain(np.vstack(pts), np.concatenate(wts), np.concatenate(owners), keys, polygon)


def edge_diamond(mesh: CRMesh, e: int, fraction: float, half_along: float, half_across: float) -> np.ndarray:
    """Rhombus with one diagonal on edge e, centred at p0 + fraction (p1 - p0)."""
    a, b = (mesh.vertices[v] for v in mesh.edges[e])
    tangent = (b - a) / np.linalg.norm(b - a)
    normal = np.array([-tangent[1], tangent[0]])
    center = a + fraction * (b - a)
    return np.array([
        center + half_along * tangent,
        center + half_across * normal,
        center - half_along * tangent,
        center - half_across * normal,
    ])


def cr_selection(mesh: CRMesh, variant: str, fraction: float = 0.25,
                 edges: Optional[Sequence[int]] = None) -> Selection:
    """Subdomains per edge.

    S1: diamond of half-diagonals h/16 at the midpoint. S2: rhombus with the
    whole edge as one diagonal, h/16 across. S3: diamond of half-diagonals h/16
    at the point fraction along the edge (a square of side h / (8 sqrt 2)).
    """
    if variant not in VARIANTS:
        raise ValidationError(f"Unknown CR variant {variant}", field="variant", value=variant)
    small = mesh.h / 16.0
    chosen = range(mesh.size) if edges is None else edges
    selection: Selection = {}
    for e in chosen:
        if variant == "S1":
            poly = edge_diamond(mesh, e, 0.5, small, small)
        elif variant == "S2":
            a, b = (mesh.vertices[v] for v in mesh.edges[e])
            poly = edge_diamond(mesh, e, 0.5, 0.5 * np.linalg.norm(b - a), small)
        else:
            poly = edge_diamond(mesh, e, fraction, small, small)
        selection[e] = polygon_subdomain(mesh, poly)
    return selection


# ---------------------------------------------------------------------------
# Interpolations
# ---------------------------------------------------------------------------

Sampler = Callable[[np.ndarray, np.ndarray], np.ndarray]


def as_sampler(v: Union[CRFunction, Callable]) -> Sampler:
    """(points, triangles) -> values for a CR function or a global callable v(x, y)."""
    if isinstance(v, CRFunction):
        return v.evaluate
    return lambda points, tris: np.asarray(v(points[:, 0], points[:, 1]), dtype=float)


def cr_projective_interpolations(variant: str, v: Union[CRFunction, Callable], mesh: CRMesh,
                                 fraction: float = 0.25,
                                 duals: Optional[Dict[int, DualFunctional]] = None) -> np.ndarray:
    """Edge coefficients of the interpolant of v.

    S1 takes the midpoint value, S2 the edge mean, S3 the pairing with the
    L2 dual on the quarter-point diamond (built here unless duals are passed).
    Each one is a projection on the CR space.
    """
    sampler = as_sampler(v)
    first_tri = np.array([tris[0] for tris in mesh.edge_triangles])
    if variant == "S1":
        return sampler(mesh.midpoints, first_tri)
    if variant == "S2":
        nodes, weights = np.polynomial.legendre.leggauss(4)
        s = 0.5 * (nodes + 1.0)
        a = mesh.vertices[[e[0] for e in mesh.edges]]
        b = mesh.vertices[[e[1] for e in mesh.edges]]
        values = np.zeros(mesh.size)
        for q in range(len(s)):
            points = a + s[q] * (b - a)
            values += 0.5 * weights[q] * sampler(points, first_tri)
        return values
    if variant == "S3":
        family = CRFamily(mesh)
        if duals is None:
            duals = build_dual_functionals(family, cr_selection(mesh, "S3", fraction))
        return np.array([duals[e].apply(family, sampler) for e in range(mesh.size)])
    raise ValidationError(f"Unknown CR variant {variant}", field="variant", value=variant)


# ---------------------------------------------------------------------------
# Dual coefficient report
# ---------------------------------------------------------------------------

class EdgeDual(BaseModel):
    edge: str
    kind: str
    fraction: float
    own: float
    coefficients: Dict[str, float] = Field(default_factory=dict)
    multiset: List[float] = Field(default_factory=list)
    duality_defect: float


class CRDualReport(BaseModel):
    """Dual coefficients scaled by h^2 for one edge of every orientation."""

    h: float
    n: int
    edges: List[EdgeDual] = Field(default_factory=list)

    def for_kind(self, kind: str, fraction: float = 0.25) -> EdgeDual:
        for item in self.edges:
            if item.kind == kind and np.isclose(item.fraction, fraction):
                return item
        raise KeyError(kind)


def demo_edges(mesh: CRMesh) -> Dict[str, int]:
    """One interior edge of each orientation around square (s, s)."""
    if mesh.n < 3:
        raise ValidationError("The dual demo needs n >= 3", field="n", value=mesh.n)
    s = max(1, mesh.n // 2 - 1)
    v = mesh.vertex_id
    idx = mesh.edge_index
    return {
        "horizontal": idx[tuple(sorted((v(s, s), v(s + 1, s))))],
        "vertical": idx[tuple(sorted((v(s, s), v(s, s + 1))))],
        "diagonal": idx[tuple(sorted((v(s, s), v(s + 1, s + 1))))],
    }


def cr_dual_demo(h: float = 0.25, fractions: Sequence[float] = (0.25, 0.75)) -> CRDualReport:
    """Dual functions on quarter-point diamonds of representative interior edges."""
    if not h > 0:
        raise ValidationError("h must be positive", field="h", value=h)
    n = int(round(1.0 / h))
    if not np.isclose(n * h, 1.0):
        raise ValidationError("1/h must be an integer", field="h", value=h)
    mesh = CRMesh(n)
    family = CRFamily(mesh)
    report = CRDualReport(h=mesh.h, n=n)
    for kind, e in demo_edges(mesh).items():
        for fraction in fractions:
            selection = cr_selection(mesh, "S3", fraction, edges=[e])
            duals = build_dual_functionals(family, selection)
            dual = duals[e]
            scaled = dual.coefficients * mesh.h ** 2
            report.edges.append(EdgeDual(
                edge=mesh.edge_label(e),
                kind=kind,
                fraction=fraction,
                own=float(scaled[0]),
                coefficients={mesh.edge_label(j): float(c) for j, c in zip(dual.ids, scaled)},
                multiset=sorted(float(c) for c in scaled),
                duality_defect=duality_defect(family, duals),
            ))
    logger.info("CR dual demo", h=mesh.h, edges=len(report.edges))
    return report


def expected_dual_multisets() -> Dict[str, List[float]]:
    """Closed-form h^2-scaled dual coefficients for axis-parallel and diagonal edges."""
    r = 8.0 * np.sqrt(2.0)
    q1 = -384.0 * (r - 1.0)
    q2 = -384.0 * (r - 129.0)
    axis = sorted([-18048.0, 6528.0, 12672.0, 6528.0, 31104.0])
    return {
        "horizontal": axis,
        "vertical": axis,
        "diagonal": sorted([q1, q2, 24960.0, q2, q1]),
    }
