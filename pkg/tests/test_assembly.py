"""Tests for sparse assembly and the linear solve."""

import io

import numpy as np
import pytest

from src.analysis.manufactured import get_example
from src.core.exceptions import ValidationError
from src.fem.assembly import (
    assemble,
    assemble_load,
    assemble_mass,
    dump_system,
    galerkin_residual,
    is_positive_definite,
    solve,
)
from src.fem.basis import build_interior_set
from src.fem.mesh import classify
from src.tools.verification import lattice_adjacency


def ones(x, y):
    return np.ones_like(x)


@pytest.fixture(scope="module")
def system8(interior8):
    return assemble(interior8, get_example(1).source(1.0))


class TestEntries:
    """Test closed-form entries on uniform patches."""

    def test_hessian_diagonal(self, system8, interior8):
        """A_KK = 5 / h^2 for a function whose patch is uniform."""
        k = interior8.index[(3, 3)]
        assert system8.A[k, k] == pytest.approx(5.0 * 64.0)

    def test_gradient_diagonal(self, system8, interior8):
        """B_KK = 19/24 independently of h."""
        k = interior8.index[(3, 3)]
        assert system8.B[k, k] == pytest.approx(19.0 / 24.0)

    def test_load_of_constant(self, interior8):
        """The integral of phi_K is L_K H_K."""
        F = assemble_load(interior8, ones)
        assert F[interior8.index[(3, 3)]] == pytest.approx(1.0 / 64.0)

    def test_load_matches_assembly(self, system8, interior8):
        F = assemble_load(interior8, get_example(1).source(1.0))
        np.testing.assert_allclose(F, system8.F, rtol=1e-13, atol=1e-15)

    def test_mass_is_symmetric(self, interior8):
        M = assemble_mass(interior8)
        assert abs(M - M.T).max() <= 1e-15


class TestStructure:
    """Test symmetry, definiteness and sparsity."""

    @pytest.mark.parametrize("name", ["uniform8", "pattern2", "lshape4"])
    def test_symmetry_and_definiteness(self, request, name):
        grid = request.getfixturevalue(name)
        system = assemble(build_interior_set(grid, classify(grid)), get_example(1).source(1.0))
        for M in (system.A, system.B):
            assert abs(M - M.T).max() / abs(M).max() <= 1e-12
        for eps in (1.0, 2.0 ** -6, 2.0 ** -12, 0.0):
            assert is_positive_definite(system.operator(eps))

    @pytest.mark.parametrize("name", ["uniform8", "lshape4"])
    def test_sparsity_pattern(self, request, name):
        """Nonzeros exactly where two patches share an active cell."""
        grid = request.getfixturevalue(name)
        basis = build_interior_set(grid, classify(grid))
        system = assemble(basis, ones)
        coo = system.B.tocoo()
        assert set(zip(coo.row.tolist(), coo.col.tolist())) == lattice_adjacency(basis)
        assert int(np.max(np.diff(system.B.indptr))) <= 25

    def test_full_row(self, system8, interior8):
        """A function away from the boundary couples to 25 functions."""
        k = interior8.index[(3, 3)]
        assert system8.B.indptr[k + 1] - system8.B.indptr[k] == 25

    def test_extended_basis_rejected(self, extended6):
        with pytest.raises(ValidationError):
            assemble(extended6, ones)


class TestSolve:
    """Test the linear solve."""

    @pytest.mark.parametrize("eps", [1.0, 2.0 ** -6, 2.0 ** -12, 0.0])
    def test_galerkin_residual(self, system8, eps):
        coeffs = solve(system8, eps)
        assert galerkin_residual(system8, coeffs, eps) <= 1e-10

    def test_zero_load(self, system8):
        zero = system8.with_load(np.zeros(system8.dim))
        assert np.all(solve(zero, 1.0).values == 0.0)

    def test_invalid_inputs(self, system8):
        with pytest.raises(ValidationError):
            solve(system8, -1.0)
        with pytest.raises(ValidationError):
            system8.with_load(np.zeros(system8.dim + 1))

    def test_dense_check_limit(self, system8, monkeypatch):
        from src.config import settings
        monkeypatch.setattr(settings, "dense_check_limit", 5)
        with pytest.raises(ValidationError):
            is_positive_definite(system8.B)


class TestDump:
    """Test the text dump of the system."""

    def test_dump_headers(self, system8):
        stream = io.StringIO()
        dump_system(system8, stream, eps=0.5)
        text = stream.getvalue()
        assert text.startswith(f"# A {system8.dim} {system8.dim} {system8.A.nnz}\n")
        assert f"# B {system8.dim} {system8.dim}" in text
        assert "# K(eps=0.5)" in text
        assert text.rstrip().splitlines()[-1] == repr(float(system8.F[-1]))
