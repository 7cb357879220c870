"""Convergence studies: energy errors, rate fits, tables and CSV output."""

import io
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field

from ..config import DEFAULT_EPS, DEFAULT_LEVELS, PUBLISHED_TABLES, TABLE_FOR_RUN, TABLE_TOLERANCES, settings
from ..core.cache_manager import cache_manager
from ..core.exceptions import InsufficientData, ValidationError
from ..fem.assembly import SparseSPDSystem, assemble, assemble_load, solve
from ..fem.basis import BasisSet, build_interior_set
from ..fem.fields import PiecewiseP2Field, field_from_coefficients
from ..fem.interpolation import interpolate_h0
from ..fem.mesh import TensorGrid, build_grid, classify, regularity
from ..fem.polynomial import evaluate_stack, gauss_rects, gradient_stack, hessian_stack
from .manufactured import ExampleSpec, get_example

logger = structlog.get_logger()

MESH_KINDS = ("uniform", "pattern")


class Reference(Protocol):
    def value(self, x, y): ...
    def gradient(self, x, y): ...
    def hessian(self, x, y): ...


class ErrorNorms(BaseModel):
    """Squared broken seminorms of the error and of the reference."""

    e0: float
    e1: float
    e2: float
    u0: float
    u1: float
    u2: float


class ConvergenceRow(BaseModel):
    eps: float
    h: float
    level: int = 0
    dofs: int = 0
    rel_energy: float
    rel_h1: float
    rel_h2: float
    rel_l2: float
    interp_energy: Optional[float] = None


class ConvergenceTable(BaseModel):
    example_id: int
    mesh_kind: str
    pattern_ratio: Optional[float] = None
    rows: List[ConvergenceRow] = Field(default_factory=list)
    rates: Dict[float, float] = Field(default_factory=dict)
    pairwise_rates: Dict[float, List[float]] = Field(default_factory=dict)

    def rows_for(self, eps: float) -> List[ConvergenceRow]:
        return sorted((r for r in self.rows if r.eps == eps), key=lambda r: -r.h)

    def to_frame(self) -> pd.DataFrame:
        columns = ["eps", "h", "rel_energy", "rel_h1", "rel_h2", "rel_l2"]
        if any(r.interp_energy is not None for r in self.rows):
            columns.append("interp_energy")
        frame = pd.DataFrame([r.model_dump() for r in self.rows])
        return frame[columns] if not frame.empty else pd.DataFrame(columns=columns)


def _ratio(num: float, den: float) -> float:
    if den > 0:
        return float(np.sqrt(num / den))
    return 0.0 if num == 0 else float("inf")


def error_norms(field: PiecewiseP2Field, reference: Reference, quad_order: Optional[int] = None) -> ErrorNorms:
    """Squared broken L2, H1 and H2 (semi)norms of reference - field and of reference."""
    order = quad_order or settings.error_quad_order
    grid = field.grid
    cells = grid.active_cells
    X, Y, W = gauss_rects(grid.bounds_array(cells), order)
    coeffs, centers, scales = field.stack(cells)

    uh = evaluate_stack(coeffs, centers, scales, X, Y)
    gxh, gyh = gradient_stack(coeffs, centers, scales, X, Y)
    hxxh, hxyh, hyyh = (h[:, None] for h in hessian_stack(coeffs, scales))

    u = np.asarray(reference.value(X, Y), dtype=float)
    gx, gy = (np.asarray(g, dtype=float) for g in reference.gradient(X, Y))
    hxx, hxy, hyy = (np.asarray(h, dtype=float) for h in reference.hessian(X, Y))

    def integral(values):
        return float(np.sum(W * values))

    return ErrorNorms(
        e0=integral((u - uh) ** 2),
        e1=integral((gx - gxh) ** 2 + (gy - gyh) ** 2),
        e2=integral((hxx - hxxh) ** 2 + 2.0 * (hxy - hxyh) ** 2 + (hyy - hyyh) ** 2),
        u0=integral(u ** 2),
        u1=integral(gx ** 2 + gy ** 2),
        u2=integral(hxx ** 2 + 2.0 * hxy ** 2 + hyy ** 2),
    )


def energy_error(field: PiecewiseP2Field, reference: Reference, eps: float,
                 quad_order: Optional[int] = None, level: int = 0, dofs: int = 0) -> ConvergenceRow:
    """Relative errors of field against reference; the energy norm is
    sqrt(eps^2 |w|_{2,h}^2 + |w|_{1,h}^2)."""
    n = error_norms(field, reference, quad_order)
    e2 = eps * eps
    return ConvergenceRow(
        eps=eps,
        h=field.grid.h,
        level=level,
        dofs=dofs,
        rel_energy=_ratio(e2 * n.e2 + n.e1, e2 * n.u2 + n.u1),
        rel_h1=_ratio(n.e1, n.u1),
        rel_h2=_ratio(n.e2, n.u2),
        rel_l2=_ratio(n.e0, n.u0),
    )


def rate_fit(errors: Sequence[float], hs: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if len(errors) != len(hs):
        raise ValidationError("errors and hs differ in length", field="hs", value=len(hs))
    if len(errors) < 2:
        raise InsufficientData("A rate needs at least two (h, error) pairs", {"points": len(errors)})
    if np.any(errors <= 0) or np.any(hs <= 0):
        raise ValidationError("Rates need positive errors and mesh sizes")
    if np.unique(hs).size < 2:
        raise InsufficientData("A rate needs two distinct mesh sizes")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def pairwise_rates(errors: Sequence[float], hs: Sequence[float]) -> List[float]:
    """log(e_i / e_{i+1}) / log(h_i / h_{i+1}) for consecutive levels."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    return [float(np.log(e[i] / e[i + 1]) / np.log(h[i] / h[i + 1])) for i in range(len(e) - 1)]


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Discretization:
    """Objects reused by every eps of one level."""

    level: int
    grid: TensorGrid
    basis: BasisSet
    system: SparseSPDSystem
    load_fourth: np.ndarray
    load_second: np.ndarray


def _discretize(example: ExampleSpec, mesh_kind: str, level: int, ratio: Optional[float]) -> Discretization:
    domain = example.domain.value
    basis_key = f"basis:{domain}:{mesh_kind}:{level}:{ratio}"

    def make_basis():
        grid = build_grid(domain, mesh_kind, level, ratio)
        regularity(grid)
        return build_interior_set(grid, classify(grid))

    basis = cache_manager.get_or_create(basis_key, make_basis)

    def make_system():
        system = assemble(basis, example.f4)
        return system, system.F.copy(), assemble_load(basis, example.f2)

    system, f4, f2 = cache_manager.get_or_create(f"system:{example.id}:{basis_key}", make_system)
    return Discretization(level=level, grid=basis.grid, basis=basis, system=system,
                          load_fourth=f4, load_second=f2)


def _run_level(example: ExampleSpec, mesh_kind: str, level: int, ratio: Optional[float],
               eps_list: Sequence[float], with_interpolation: bool) -> List[ConvergenceRow]:
    disc = _discretize(example, mesh_kind, level, ratio)
    interp_field = None
    if with_interpolation:
        _, interp_field = interpolate_h0(disc.basis, example.value)

    rows = []
    for eps in eps_list:
        system = disc.system.with_load(eps * eps * disc.load_fourth + disc.load_second)
        coeffs = solve(system, eps)
        uh = field_from_coefficients(disc.basis, coeffs)
        row = energy_error(uh, example, eps, level=level, dofs=len(disc.basis))
        if interp_field is not None:
            row.interp_energy = energy_error(interp_field, example, eps).rel_energy
        logger.info("Convergence row", example=example.id, mesh=mesh_kind, level=level,
                    eps=eps, h=row.h, rel_energy=row.rel_energy)
        rows.append(row)
    return rows


def run_convergence(example_id: int, mesh_kind: str, eps_list: Optional[Sequence[float]] = None,
                    levels: Optional[Sequence[int]] = None, pattern_ratio: Optional[float] = None,
                    with_interpolation: bool = False) -> ConvergenceTable:
    """Solve every (eps, level) pair and fit one rate per eps."""
    example = get_example(example_id)
    if mesh_kind not in MESH_KINDS:
        raise ValidationError(f"Unknown mesh kind {mesh_kind}", field="mesh", value=mesh_kind)
    eps_list = list(DEFAULT_EPS[example.id] if eps_list is None else eps_list)
    levels = list(DEFAULT_LEVELS[mesh_kind] if levels is None else levels)
    if not eps_list or not levels:
        raise ValidationError("Need at least one eps and one level")
    ratio = None
    if mesh_kind == "pattern":
        ratio = settings.pattern_ratio if pattern_ratio is None else pattern_ratio

    workers = max(1, min(settings.max_workers, len(levels)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(
            lambda lv: _run_level(example, mesh_kind, lv, ratio, eps_list, with_interpolation), levels,
        ))
    rows = [row for level_rows in results for row in level_rows]
    rows.sort(key=lambda r: (-r.eps, -r.h))

    table = ConvergenceTable(example_id=example.id, mesh_kind=mesh_kind, pattern_ratio=ratio, rows=rows)
    if len(levels) >= 2:
        for eps in eps_list:
            eps_rows = table.rows_for(eps)
            errors = [r.rel_energy for r in eps_rows]
            hs = [r.h for r in eps_rows]
            if min(errors) > 0:
                table.rates[eps] = rate_fit(errors, hs)
                table.pairwise_rates[eps] = pairwise_rates(errors, hs)
    logger.info("Convergence study finished", example=example.id, mesh=mesh_kind, rows=len(rows),
                **cache_manager.get_cache_stats())
    return table


# ---------------------------------------------------------------------------
# Output and acceptance
# ---------------------------------------------------------------------------

def table_to_csv(table: ConvergenceTable) -> str:
    """CSV rows followed by one '# rate' comment line per eps."""
    buffer = io.StringIO()
    table.to_frame().to_csv(buffer, index=False, float_format="%.6e")
    for eps, rate in table.rates.items():
        buffer.write(f"# rate eps={eps:.6e} value={rate:.4f}\n")
    return buffer.getvalue()


def write_csv(table: ConvergenceTable, path: str) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(table_to_csv(table))
    logger.info(f"Wrote convergence table to {path}")
    return path


def _eps_exponent(eps: float) -> Optional[int]:
    if eps <= 0:
        return None
    k = -np.log2(eps)
    return int(round(k)) if np.isclose(k, round(k)) else None


def check_against_published(table: ConvergenceTable) -> Tuple[List[str], List[str]]:
    """Compare a table with its published counterpart.

    Returns (failures, notes): failures gate acceptance, notes are reported only.
    Uniform runs gate on errors and rates, pattern runs on rates.
    """
    number = TABLE_FOR_RUN.get((table.example_id, table.mesh_kind))
    if number is None:
        return [f"No published table for example {table.example_id} on {table.mesh_kind} meshes"], []
    published = PUBLISHED_TABLES[number]
    tol = TABLE_TOLERANCES[table.mesh_kind]
    failures: List[str] = []
    notes: List[str] = []

    for eps, rate in table.rates.items():
        k = _eps_exponent(eps)
        if k not in published["rows"]:
            continue
        errors_ref, rate_ref = published["rows"][k]
        rows = table.rows_for(eps)
        for row in rows:
            matches = [i for i, h in enumerate(published["h"]) if np.isclose(h, row.h, rtol=5e-3)]
            if not matches:
                continue
            ref = errors_ref[matches[0]]
            diff = abs(row.rel_energy - ref)
            label = f"table {number} eps=2^-{k} h={row.h:.4e}: {row.rel_energy:.4f} vs {ref:.4f}"
            if table.mesh_kind == "uniform":
                if diff > tol["abs"] and diff > tol["rel"] * ref:
                    failures.append(label)
            elif diff > tol["report_rel"] * ref:
                notes.append(label)
        if len(rows) == len(published["h"]) and abs(rate - rate_ref) > tol["rate"]:
            failures.append(f"table {number} eps=2^-{k}: rate {rate:.3f} vs {rate_ref:.2f}")
    return failures, notes
