"""Quadratic polynomials on axis-aligned rectangles, Gauss rules and Morley fits.

A P2 piece is stored in the scaled local frame of its cell,

    xi = (x - xc) / l,  eta = (y - yc) / l,  l = max(L, H),

with coefficients ordered as (1, xi, eta, xi^2, xi*eta, eta^2). Keeping the
frame local makes every fit an O(1) problem regardless of the cell size.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

from ..config import settings
from ..core.exceptions import InconsistentDofs, ValidationError

logger = structlog.get_logger()

# Outward normals in edge order bottom, top, left, right
EDGE_NORMALS = np.array([[0.0, -1.0], [0.0, 1.0], [-1.0, 0.0], [1.0, 0.0]])


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError("Rectangle must have positive width and height",
                                  field="rect", value=(self.x0, self.y0, self.x1, self.y1))

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def h(self) -> float:
        """Cell size max(L, H)."""
        return max(self.width, self.height)

    @property
    def rho(self) -> float:
        """Inscribed radius min(L, H) / 2."""
        return 0.5 * min(self.width, self.height)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def vertices(self) -> np.ndarray:
        """Vertices in the order lower-left, lower-right, upper-left, upper-right."""
        return np.array([[self.x0, self.y0], [self.x1, self.y0],
                         [self.x0, self.y1], [self.x1, self.y1]])

    def edge_midpoints(self) -> np.ndarray:
        """Edge midpoints in the order bottom, top, left, right."""
        xc, yc = self.center
        return np.array([[xc, self.y0], [xc, self.y1], [self.x0, yc], [self.x1, yc]])

    def sample(self, n: int = 5) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform n x n sample of the closed cell, flattened."""
        X, Y = np.meshgrid(np.linspace(self.x0, self.x1, n), np.linspace(self.y0, self.y1, n),
                           indexing="ij")
        return X.ravel(), Y.ravel()


# ---------------------------------------------------------------------------
# P2 pieces
# ---------------------------------------------------------------------------

def _local(centers, scales, x, y):
    """Broadcast helper: local coordinates for stacked pieces."""
    xi = (x - centers[..., 0:1]) / scales[..., None]
    eta = (y - centers[..., 1:2]) / scales[..., None]
    return xi, eta


def evaluate_stack(coeffs: np.ndarray, centers: np.ndarray, scales: np.ndarray,
                   x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate n pieces at their own points; coeffs (n, 6), x and y (n, q)."""
    xi, eta = _local(centers, scales, x, y)
    c = coeffs[..., :, None]
    return (c[..., 0, :] + c[..., 1, :] * xi + c[..., 2, :] * eta
            + c[..., 3, :] * xi * xi + c[..., 4, :] * xi * eta + c[..., 5, :] * eta * eta)


def gradient_stack(coeffs: np.ndarray, centers: np.ndarray, scales: np.ndarray,
                   x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Global gradient of n pieces at their own points."""
    xi, eta = _local(centers, scales, x, y)
    c = coeffs[..., :, None]
    s = scales[..., None]
    gx = (c[..., 1, :] + 2.0 * c[..., 3, :] * xi + c[..., 4, :] * eta) / s
    gy = (c[..., 2, :] + c[..., 4, :] * xi + 2.0 * c[..., 5, :] * eta) / s
    return gx, gy


def hessian_stack(coeffs: np.ndarray, scales: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant global Hessian entries (hxx, hxy, hyy) of n pieces."""
    s2 = scales ** 2
    return 2.0 * coeffs[..., 3] / s2, coeffs[..., 4] / s2, 2.0 * coeffs[..., 5] / s2


@dataclass(frozen=True, eq=False)
class P2Poly:
    """Quadratic polynomial in the scaled frame of a cell."""

    coeffs: np.ndarray
    center: Tuple[float, float] = (0.0, 0.0)
    scale: float = 1.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(6)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not self.scale > 0:
            raise ValidationError("Frame scale must be positive", field="scale", value=self.scale)

    @classmethod
    def on_rect(cls, rect: Rect, coeffs: Sequence[float]) -> "P2Poly":
        return cls(np.asarray(coeffs, dtype=float), rect.center, rect.h)

    @classmethod
    def zero(cls, rect: Rect) -> "P2Poly":
        return cls(np.zeros(6), rect.center, rect.h)

    @classmethod
    def from_global(cls, coeffs: Sequence[float], rect: Optional[Rect] = None) -> "P2Poly":
        """Build a0 + ax x + ay y + axx x^2 + axy xy + ayy y^2, optionally in the frame of rect."""
        poly = cls(np.asarray(coeffs, dtype=float), (0.0, 0.0), 1.0)
        if rect is None:
            return poly
        return poly.rebase(rect.center, rect.h)

    def rebase(self, center: Tuple[float, float], scale: float) -> "P2Poly":
        """Same polynomial expressed in another frame."""
        a = scale / self.scale
        bx = (center[0] - self.center[0]) / self.scale
        by = (center[1] - self.center[1]) / self.scale
        c0, cx, cy, cxx, cxy, cyy = self.coeffs
        new = np.array([
            c0 + cx * bx + cy * by + cxx * bx * bx + cxy * bx * by + cyy * by * by,
            a * (cx + 2.0 * cxx * bx + cxy * by),
            a * (cy + cxy * bx + 2.0 * cyy * by),
            a * a * cxx,
            a * a * cxy,
            a * a * cyy,
        ])
        return P2Poly(new, center, scale)

    def global_coefficients(self) -> np.ndarray:
        return self.rebase((0.0, 0.0), 1.0).coeffs

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = (x - self.center[0]) / self.scale
        eta = (y - self.center[1]) / self.scale
        c = self.coeffs
        return c[0] + c[1] * xi + c[2] * eta + c[3] * xi * xi + c[4] * xi * eta + c[5] * eta * eta

    def grad(self, x, y) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xi = (x - self.center[0]) / self.scale
        eta = (y - self.center[1]) / self.scale
        c = self.coeffs
        gx = (c[1] + 2.0 * c[3] * xi + c[4] * eta) / self.scale
        gy = (c[2] + c[4] * xi + 2.0 * c[5] * eta) / self.scale
        return gx, gy

    def hessian(self) -> np.ndarray:
        c = self.coeffs
        return np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]]) / self.scale ** 2

    def _same_frame(self, other: "P2Poly") -> "P2Poly":
        if other.center == self.center and other.scale == self.scale:
            return other
        return other.rebase(self.center, self.scale)

    def __add__(self, other: "P2Poly") -> "P2Poly":
        other = self._same_frame(other)
        return P2Poly(self.coeffs + other.coeffs, self.center, self.scale)

    def __sub__(self, other: "P2Poly") -> "P2Poly":
        other = self._same_frame(other)
        return P2Poly(self.coeffs - other.coeffs, self.center, self.scale)

    def __mul__(self, factor: float) -> "P2Poly":
        return P2Poly(self.coeffs * float(factor), self.center, self.scale)

    __rmul__ = __mul__

    def __neg__(self) -> "P2Poly":
        return P2Poly(-self.coeffs, self.center, self.scale)

    def seminorm(self, rect: Rect, k: int) -> float:
        """|p|_{k, rect} for k = 0, 1, 2 (k = 0 is the L2 norm)."""
        if k == 2:
            H = self.hessian()
            return float(np.sqrt(rect.area * (H[0, 0] ** 2 + 2.0 * H[0, 1] ** 2 + H[1, 1] ** 2)))
        rule = gauss_rect(rect, 3)
        x, y = rule.points[:, 0], rule.points[:, 1]
        if k == 0:
            return float(np.sqrt(rule.integrate(self(x, y) ** 2)))
        if k == 1:
            gx, gy = self.grad(x, y)
            return float(np.sqrt(rule.integrate(gx ** 2 + gy ** 2)))
        raise ValidationError("Seminorm order must be 0, 1 or 2", field="k", value=k)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadRule:
    """Points (m, 2) and weights (m,)."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def integrate_function(self, f) -> float:
        return self.integrate(f(self.x, self.y))

    def mean(self, f) -> float:
        return self.integrate_function(f) / float(self.weights.sum())


@lru_cache(maxsize=None)
def reference_gauss(n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes on [-1, 1]^2 as (s, t, weights), each (n*n,)."""
    if n < 1:
        raise ValidationError("Quadrature order must be positive", field="order", value=n)
    nodes, weights = np.polynomial.legendre.leggauss(n)
    S, T = np.meshgrid(nodes, nodes, indexing="ij")
    W = np.outer(weights, weights)
    for arr in (S, T, W):
        arr.setflags(write=False)
    return S.ravel(), T.ravel(), W.ravel()


def gauss_rect(rect: Rect, n: int) -> QuadRule:
    """Tensor Gauss-Legendre rule with n points per direction, exact for Q_{2n-1}."""
    s, t, w = reference_gauss(n)
    xc, yc = rect.center
    hx, hy = 0.5 * rect.width, 0.5 * rect.height
    points = np.column_stack([xc + hx * s, yc + hy * t])
    return QuadRule(points, w * hx * hy)


def gauss_rects(bounds: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss rules for many cells at once.

    bounds is (k, 4) with rows (x0, y0, x1, y1); returns X, Y, W of shape (k, n*n).
    """
    s, t, w = reference_gauss(n)
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 4)
    hx = 0.5 * (bounds[:, 2] - bounds[:, 0])
    hy = 0.5 * (bounds[:, 3] - bounds[:, 1])
    xc = 0.5 * (bounds[:, 2] + bounds[:, 0])
    yc = 0.5 * (bounds[:, 3] + bounds[:, 1])
    X = xc[:, None] + hx[:, None] * s[None, :]
    Y = yc[:, None] + hy[:, None] * t[None, :]
    W = (hx * hy)[:, None] * w[None, :]
    return X, Y, W


def cell_mean(rect: Rect, v, order: Optional[int] = None) -> float:
    """Mean value of v over rect with a Gauss rule."""
    return gauss_rect(rect, order or settings.interp_quad_order).mean(v)


# ---------------------------------------------------------------------------
# Morley data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MorleyDofs:
    """Vertex values (LL, LR, UL, UR) and outward normal-derivative edge means
    (bottom, top, left, right) of a rectangle."""

    vertex_values: np.ndarray
    edge_normal_means: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertex_values", np.asarray(self.vertex_values, dtype=float).reshape(4))
        object.__setattr__(self, "edge_normal_means", np.asarray(self.edge_normal_means, dtype=float).reshape(4))


def morley_dofs(p: P2Poly, rect: Rect) -> MorleyDofs:
    """Exact Morley data of a quadratic; the normal derivative is linear along
    each edge, so its mean is the midpoint value."""
    verts = rect.vertices()
    mids = rect.edge_midpoints()
    gx, gy = p.grad(mids[:, 0], mids[:, 1])
    normal = gx * EDGE_NORMALS[:, 0] + gy * EDGE_NORMALS[:, 1]
    return MorleyDofs(p(verts[:, 0], verts[:, 1]), normal)


@lru_cache(maxsize=4096)
def _morley_system(width: float, height: float) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled 8x6 collocation matrix and its pseudo-inverse for a width x height cell."""
    ell = max(width, height)
    a = 0.5 * width / ell
    b = 0.5 * height / ell
    rows = [[1.0, xi, eta, xi * xi, xi * eta, eta * eta]
            for xi, eta in ((-a, -b), (a, -b), (-a, b), (a, b))]
    # derivative rows are multiplied by ell
    rows += [
        [0.0, 0.0, -1.0, 0.0, 0.0, 2.0 * b],
        [0.0, 0.0, 1.0, 0.0, 0.0, 2.0 * b],
        [0.0, -1.0, 0.0, 2.0 * a, 0.0, 0.0],
        [0.0, 1.0, 0.0, 2.0 * a, 0.0, 0.0],
    ]
    M = np.array(rows)
    pinv = np.linalg.pinv(M)
    M.setflags(write=False)
    pinv.setflags(write=False)
    return M, pinv


def fit_p2_from_morley(rect: Rect, dofs: MorleyDofs,
                       tol: Optional[float] = None) -> Tuple[P2Poly, float]:
    """Least-squares quadratic matching eight Morley values; returns (poly, residual).

    The 8x6 system has rank 6, so consistent data are reproduced exactly and
    anything else leaves a residual that is reported and checked against tol.
    """
    tol = settings.fit_tol if tol is None else tol
    M, pinv = _morley_system(rect.width, rect.height)
    d = np.concatenate([dofs.vertex_values, dofs.edge_normal_means * rect.h])
    c = pinv @ d
    residual = float(np.linalg.norm(M @ c - d) / max(1.0, float(np.linalg.norm(d))))
    if residual > tol:
        raise InconsistentDofs(
            f"Morley data on {rect.bounds} are not reproduced by a quadratic",
            residual=residual, tol=tol,
        )
    return P2Poly.on_rect(rect, c), residual
