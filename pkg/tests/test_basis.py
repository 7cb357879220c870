"""Tests for the patch basis functions and their reproduction identities."""

import numpy as np
import pytest

from src.core.exceptions import EmptySpace, ValidationError
from src.fem.assembly import assemble_gram, is_positive_definite
from src.fem.basis import (
    BasisKind,
    build_extended_set,
    build_interior_set,
    build_phi,
    center_functional,
    checkerboard_sign,
    mean_functional,
    norm_bound_constant,
    patch_dofs,
    patch_ratios,
    verify_identities,
)
from src.fem.mesh import Patch3x3, build_lshape, build_pattern, build_uniform, classify
from src.fem.polynomial import P2Poly, Rect
from src.config import settings

IDENTITY_GRIDS = {
    "uniform-4": lambda: build_uniform(n=4),
    "uniform-6": lambda: build_uniform(n=6),
    "uniform-8": lambda: build_uniform(n=8),
    "pattern-1": lambda: build_pattern(1),
    "pattern-2": lambda: build_pattern(2),
    "pattern-3": lambda: build_pattern(3),
    "lshape-2": lambda: build_lshape(2),
    "lshape-4": lambda: build_lshape(4),
}


class TestPatchDofs:
    """Test the closed-form Morley data."""

    def test_uniform_ratios(self):
        """Congruent cells: anchor 1/4 and unit gammas."""
        anchor, gx, gy = patch_ratios(Patch3x3.from_sizes((1, 1, 1), (1, 1, 1)))
        assert anchor == pytest.approx(0.25)
        assert gx == pytest.approx(1.0)
        assert gy == pytest.approx(1.0)

    def test_boundary_of_patch_is_zero(self, rng):
        """Vertex values and normal means vanish on the patch boundary."""
        p = Patch3x3.from_sizes(rng.uniform(0.2, 1, 3), rng.uniform(0.2, 1, 3))
        _, V, U, Z = patch_dofs(p)
        for m in (0, 3):
            assert np.all(V[m, :] == 0) and np.all(V[:, m] == 0)
            assert np.all(U[:, m] == 0) and np.all(Z[m, :] == 0)


class TestBuildPhi:
    """Test the nine fitted pieces."""

    def test_uniform_center_piece(self):
        """On unit cells the center piece is 1/2 - |x - c|^2 / 2."""
        fn = build_phi(Patch3x3.from_sizes((1, 1, 1), (1, 1, 1)))
        center = fn.pieces[(1, 1)]
        assert center(1.5, 1.5) == pytest.approx(0.5)
        assert center(1.0, 1.0) == pytest.approx(0.25)
        np.testing.assert_allclose(center.hessian(), -np.eye(2), atol=1e-12)

    def test_uniform_edge_and_corner_pieces(self):
        """Left piece 1/8 + x/4 + x^2/4 - y^2/4 and the corner value 1/4 at the shared vertex."""
        fn = build_phi(Patch3x3.from_sizes((1, 1, 1), (1, 1, 1)))
        left = fn.pieces[(0, 1)]
        assert left(0.5, 1.5) == pytest.approx(1 / 8)
        np.testing.assert_allclose(left.hessian(), [[0.5, 0.0], [0.0, -0.5]], atol=1e-12)
        corner = fn.pieces[(2, 2)]
        assert corner(2.0, 2.0) == pytest.approx(0.25)
        assert corner(3.0, 3.0) == pytest.approx(0.0, abs=1e-14)

    def test_fits_are_exact(self, rng):
        """Morley data of any patch are consistent on every cell."""
        for _ in range(10):
            p = Patch3x3.from_sizes(rng.uniform(0.05, 1, 3), rng.uniform(0.05, 1, 3),
                                    origin=tuple(rng.uniform(-1, 1, 2)))
            assert build_phi(p).fit_residual <= 1e-12

    def test_continuity_at_vertices(self, rng):
        """Neighbouring pieces agree at shared vertices."""
        p = Patch3x3.from_sizes(rng.uniform(0.2, 1, 3), rng.uniform(0.2, 1, 3))
        fn = build_phi(p)
        xl, yl = p.xlines, p.ylines
        for m in range(1, 3):
            for n in range(1, 3):
                values = [fn.pieces[(a, b)](xl[m], yl[n]) for a in (m - 1, m) for b in (n - 1, n)]
                np.testing.assert_allclose(values, values[0], atol=1e-12)


class TestBasisSets:
    """Test interior and extended families."""

    def test_sizes(self, interior6, extended6):
        assert len(interior6) == 16
        assert len(extended6) == 64
        assert interior6.kind == BasisKind.INTERIOR
        assert extended6.kind == BasisKind.EXTENDED

    def test_coverage(self, interior6):
        """Central cells see nine functions, corner cells one."""
        counts = interior6.coverage_counts()
        assert counts[(2, 2)] == 9
        assert counts[(0, 0)] == 1
        assert counts[(0, 2)] == 3

    def test_support_is_clipped(self, extended6):
        """Exterior functions keep only their active pieces."""
        fn = extended6.functions[extended6.index[(-1, -1)]]
        assert set(fn.support) == {(0, 0)}
        assert len(fn.pieces) == 9

    def test_empty_space(self):
        grid = build_uniform(n=2)
        with pytest.raises(EmptySpace):
            build_interior_set(grid, classify(grid))

    def test_checkerboard_sign(self):
        assert checkerboard_sign((0, 0)) == 1
        assert checkerboard_sign((1, 0)) == -1
        assert checkerboard_sign((-1, -1)) == 1


class TestIdentities:
    """Test the reproduction identities of the extended set."""

    @pytest.mark.parametrize("name", IDENTITY_GRIDS)
    def test_identities_hold(self, name):
        grid = IDENTITY_GRIDS[name]()
        report = verify_identities(build_extended_set(grid, classify(grid)))
        assert report.max_residual <= 1e-10
        assert "checkerboard" in report.residuals

    @pytest.mark.parametrize("name", IDENTITY_GRIDS)
    def test_identities_with_stretched_ghosts(self, name):
        """Ghost lengths scaled by 1.3 leave every identity intact."""
        grid = IDENTITY_GRIDS[name]()
        report = verify_identities(build_extended_set(grid, classify(grid), ghost_scale=1.3))
        assert report.ghost_scale == 1.3
        assert report.max_residual <= 1e-10

    def test_interior_set_rejected(self, interior6):
        with pytest.raises(ValidationError):
            verify_identities(interior6)

    def test_functionals_on_quadratics(self):
        """r_T and t_T of x^2 on [0, 1]^2."""
        rect = Rect(0.0, 0.0, 1.0, 1.0)
        v = P2Poly.from_global([0, 0, 0, 1, 0, 0])
        assert center_functional(rect, v) == pytest.approx(0.25 - 2.0 / 8.0)
        assert mean_functional(rect, v) == pytest.approx(1.0 / 3.0 - 2.0 / 6.0)


class TestStability:
    """Test Gram definiteness, the checkerboard kernel and norm bounds."""

    def test_interior_gram_positive_definite(self, interior6):
        assert is_positive_definite(assemble_gram(interior6))

    def test_checkerboard_in_extended_kernel(self, extended6):
        G = assemble_gram(extended6)
        board = extended6.checkerboard_vector()
        kernel = np.max(np.abs(G @ board)) / (np.max(np.abs(G.data)) * np.max(np.abs(board)))
        assert kernel <= 1e-10

    def test_norm_bound(self, interior6):
        constant = norm_bound_constant(interior6)
        assert 0.0 < constant < 100.0 * settings.gamma0 ** 2
