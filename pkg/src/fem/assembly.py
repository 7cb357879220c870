"""Sparse assembly and solution of eps^2 A c + B c = F over the interior basis.

A collects broken Hessian products, B broken gradient products and F the load.
Hessians are constant per piece, so A is exact; B uses a 2-point tensor rule
(exact for the biquadratic integrand) and F a 6-point rule.
"""

from dataclasses import dataclass, replace
from typing import Callable, Iterator, List, Optional, TextIO, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import structlog

from ..config import settings
from ..core.exceptions import EmptySpace, SolveFailure, ValidationError
from .basis import BasisKind, BasisSet
from .fields import Coefficients, field_from_coefficients
from .mesh import Cell
from .polynomial import Rect, reference_gauss

logger = structlog.get_logger()

Function2D = Callable[[np.ndarray, np.ndarray], np.ndarray]

__all__ = [
    "SparseSPDSystem",
    "assemble",
    "assemble_load",
    "assemble_mass",
    "assemble_gram",
    "solve",
    "galerkin_residual",
    "is_positive_definite",
    "field_from_coefficients",
    "dump_system",
]


@dataclass(frozen=True, eq=False)
class SparseSPDSystem:
    """Stiffness parts A (Hessian) and B (gradient) with load F."""

    basis: BasisSet
    A: sp.csr_matrix
    B: sp.csr_matrix
    F: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def operator(self, eps: float) -> sp.csr_matrix:
        return (eps * eps) * self.A + self.B

    def with_load(self, F: np.ndarray) -> "SparseSPDSystem":
        F = np.asarray(F, dtype=float)
        if F.shape != self.F.shape:
            raise ValidationError("Load vector has the wrong length", field="F", value=F.shape)
        return replace(self, F=F)


def _cell_blocks(basis: BasisSet) -> Iterator[Tuple[Cell, Rect, np.ndarray, np.ndarray, Tuple[float, float], float]]:
    """(cell, rect, ids, stacked coeffs, frame center, frame scale) per covered active cell."""
    grid = basis.grid
    for cell in grid.active_cells:
        ids = basis.covering.get(cell)
        if not ids:
            continue
        pieces = [basis.functions[k].support[cell] for k in ids]
        C = np.array([p.coeffs for p in pieces])
        yield cell, grid.rect(cell), np.asarray(ids), C, pieces[0].center, pieces[0].scale


def _local_values(C: np.ndarray, rect: Rect, center, scale, n: int):
    """Values, gradients and weights of stacked pieces at the n x n Gauss points of rect."""
    s, t, w = reference_gauss(n)
    hx, hy = 0.5 * rect.width, 0.5 * rect.height
    xc, yc = rect.center
    xi = (xc + hx * s - center[0]) / scale
    eta = (yc + hy * t - center[1]) / scale
    vals = (C[:, [0]] + C[:, [1]] * xi + C[:, [2]] * eta
            + C[:, [3]] * xi * xi + C[:, [4]] * xi * eta + C[:, [5]] * eta * eta)
    gx = (C[:, [1]] + 2.0 * C[:, [3]] * xi + C[:, [4]] * eta) / scale
    gy = (C[:, [2]] + C[:, [4]] * xi + 2.0 * C[:, [5]] * eta) / scale
    return vals, gx, gy, w * hx * hy, (xc + hx * s, yc + hy * t)


class _Triplets:
    """COO accumulator for symmetric local blocks."""

    def __init__(self):
        self.rows: List[np.ndarray] = []
        self.cols: List[np.ndarray] = []
        self.data: List[np.ndarray] = []

    def add(self, ids: np.ndarray, block: np.ndarray):
        m = len(ids)
        self.rows.append(np.repeat(ids, m))
        self.cols.append(np.tile(ids, m))
        self.data.append(block.ravel())

    def to_csr(self, n: int) -> sp.csr_matrix:
        if not self.data:
            return sp.csr_matrix((n, n))
        matrix = sp.coo_matrix(
            (np.concatenate(self.data), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(n, n),
        )
        return matrix.tocsr()


def assemble_load(basis: BasisSet, f: Function2D, load_quad_order: Optional[int] = None) -> np.ndarray:
    """F_K = integral of f phi_K over the domain."""
    n = load_quad_order or settings.load_quad_order
    F = np.zeros(len(basis))
    for _, rect, ids, C, center, scale in _cell_blocks(basis):
        vals, _, _, w, (x, y) = _local_values(C, rect, center, scale, n)
        F[ids] += vals @ (w * np.asarray(f(x, y), dtype=float))
    return F


def assemble(basis: BasisSet, f: Function2D, load_quad_order: Optional[int] = None) -> SparseSPDSystem:
    """Assemble A, B and F over the interior basis."""
    if basis.kind != BasisKind.INTERIOR:
        raise ValidationError("Assembly runs over the interior basis", field="kind", value=basis.kind.value)
    if len(basis) == 0:
        raise EmptySpace("Cannot assemble an empty basis")

    n_load = load_quad_order or settings.load_quad_order
    n_stiff = settings.stiffness_quad_order
    A = _Triplets()
    B = _Triplets()
    F = np.zeros(len(basis))
    for _, rect, ids, C, center, scale in _cell_blocks(basis):
        s2 = scale * scale
        hxx = 2.0 * C[:, 3] / s2
        hxy = C[:, 4] / s2
        hyy = 2.0 * C[:, 5] / s2
        A.add(ids, rect.area * (np.outer(hxx, hxx) + 2.0 * np.outer(hxy, hxy) + np.outer(hyy, hyy)))

        _, gx, gy, w, _ = _local_values(C, rect, center, scale, n_stiff)
        B.add(ids, (gx * w) @ gx.T + (gy * w) @ gy.T)

        vals, _, _, w, (x, y) = _local_values(C, rect, center, scale, n_load)
        F[ids] += vals @ (w * np.asarray(f(x, y), dtype=float))

    n = len(basis)
    system = SparseSPDSystem(basis, A.to_csr(n), B.to_csr(n), F)
    logger.info("Assembled system", dofs=n, nnz=int(system.A.nnz))
    return system


def assemble_mass(basis: BasisSet) -> sp.csr_matrix:
    """Broken L2 Gram matrix of the basis on the domain."""
    M = _Triplets()
    for _, rect, ids, C, center, scale in _cell_blocks(basis):
        vals, _, _, w, _ = _local_values(C, rect, center, scale, 3)
        M.add(ids, (vals * w) @ vals.T)
    return M.to_csr(len(basis))


def assemble_gram(basis: BasisSet) -> sp.csr_matrix:
    """Broken H1 Gram matrix (L2 plus gradient products) of the basis on the domain."""
    G = _Triplets()
    for _, rect, ids, C, center, scale in _cell_blocks(basis):
        vals, gx, gy, w, _ = _local_values(C, rect, center, scale, 3)
        G.add(ids, (vals * w) @ vals.T + (gx * w) @ gx.T + (gy * w) @ gy.T)
    return G.to_csr(len(basis))


def galerkin_residual(system: SparseSPDSystem, coefficients, eps: float) -> float:
    """max |(eps^2 A + B) c - F| / ||F||."""
    c = coefficients.values if isinstance(coefficients, Coefficients) else np.asarray(coefficients, float)
    r = system.operator(eps) @ c - system.F
    norm = float(np.linalg.norm(system.F))
    return float(np.max(np.abs(r))) / norm if norm > 0 else float(np.max(np.abs(r)))


def solve(system: SparseSPDSystem, eps: float, tol: Optional[float] = None) -> Coefficients:
    """Direct sparse LU with iterative refinement, conjugate gradients as fallback."""
    if eps < 0:
        raise ValidationError("eps must be non-negative", field="eps", value=eps)
    tol = settings.solver_rtol if tol is None else tol
    F = system.F
    normF = float(np.linalg.norm(F))
    if normF == 0.0:
        return Coefficients(system.basis, np.zeros(system.dim))

    K = system.operator(eps).tocsc()

    def relative_residual(c):
        return float(np.linalg.norm(F - K @ c)) / normF

    try:
        lu = spla.splu(K)
        c = lu.solve(F)
        for _ in range(settings.refinement_steps):
            if relative_residual(c) <= tol:
                break
            c = c + lu.solve(F - K @ c)
        res = relative_residual(c)
        if np.all(np.isfinite(c)) and res <= tol:
            logger.debug("Direct solve", eps=eps, dofs=system.dim, residual=res)
            return Coefficients(system.basis, c)
        logger.warning(f"Direct solve residual {res:.2e} above {tol:.1e}, falling back to CG")
    except RuntimeError as e:
        logger.warning(f"Direct factorization failed: {e}")

    c, info = spla.cg(K, F, rtol=tol, maxiter=settings.solver_maxiter)
    res = relative_residual(c)
    if info != 0 or not np.all(np.isfinite(c)) or res > 10 * tol:
        raise SolveFailure(f"Solve failed for eps={eps}",
                           {"cg_info": int(info), "residual": res, "dofs": system.dim})
    logger.debug("CG solve", eps=eps, dofs=system.dim, residual=res)
    return Coefficients(system.basis, c)


def is_positive_definite(matrix) -> bool:
    """Dense Cholesky test; matrices above dense_check_limit are rejected as untestable."""
    n = matrix.shape[0]
    if n > settings.dense_check_limit:
        raise ValidationError("Matrix too large for a dense definiteness check", field="n", value=n)
    dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    try:
        scipy.linalg.cholesky(0.5 * (dense + dense.T), lower=True)
        return True
    except np.linalg.LinAlgError:
        return False


def dump_system(system: SparseSPDSystem, stream: TextIO, eps: Optional[float] = None):
    """Write A, B (and eps^2 A + B) as 'row col value' triplets plus F."""
    blocks = [("A", system.A), ("B", system.B)]
    if eps is not None:
        blocks.append((f"K(eps={eps})", system.operator(eps)))
    for name, matrix in blocks:
        coo = matrix.tocoo()
        stream.write(f"# {name} {matrix.shape[0]} {matrix.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            stream.write(f"{r} {c} {v!r}\n")
    stream.write(f"# F {len(system.F)}\n")
    stream.write("\n".join(repr(float(v)) for v in system.F) + "\n")
