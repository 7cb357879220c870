"""Tests for the five-cell stencils and the quasi-interpolation operators."""

import numpy as np
import pytest

from src.analysis.manufactured import get_example
from src.analysis.study import energy_error, rate_fit
from src.core.exceptions import ValidationError
from src.fem.basis import build_extended_set, build_interior_set
from src.fem.interpolation import (
    eligible_cells,
    interpolate_extended,
    interpolate_h0,
    lattice_locator,
    projection_defect,
    reproduction_residual,
    stability_constants,
    stencil,
    stencil_exactness,
)
from src.fem.mesh import Patch3x3, build_uniform, classify, patch
from src.fem.polynomial import P2Poly


def random_p2(rng):
    return P2Poly.from_global(rng.uniform(-1.0, 1.0, 6))


class TestStencil:
    """Test the five-cell mean stencil."""

    def test_uniform_weights(self):
        """-1/6 on the four neighbours and 5/3 on the center."""
        s = stencil(Patch3x3.from_sizes((1, 1, 1), (1, 1, 1)))
        np.testing.assert_allclose(s.weights, [-1 / 6, -1 / 6, -1 / 6, -1 / 6, 5 / 3], atol=1e-15)

    def test_weights_sum_to_one(self, rng):
        s = stencil(Patch3x3.from_sizes(rng.uniform(0.2, 1, 3), rng.uniform(0.2, 1, 3)))
        assert sum(s.weights) == pytest.approx(1.0)

    def test_cell_order(self, uniform6):
        """Left, right, below, above, center."""
        s = stencil(patch(uniform6, classify(uniform6), (2, 2)))
        assert s.cells == ((1, 2), (3, 2), (2, 1), (2, 3), (2, 2))

    def test_exact_on_quadratics(self, rng):
        """The stencil equals t_K on every quadratic and every patch."""
        for _ in range(50):
            p = Patch3x3.from_sizes(rng.uniform(0.2, 1, 3), rng.uniform(0.2, 1, 3),
                                    origin=tuple(rng.uniform(-1, 1, 2)))
            assert stencil_exactness(p, random_p2(rng)) <= 1e-12


class TestInterpolation:
    """Test the interior and extended quasi-interpolation."""

    def test_constants_on_eligible_cells(self, interior6):
        one = P2Poly.from_global([1, 0, 0, 0, 0, 0])
        assert reproduction_residual(interior6, one) <= 1e-12

    def test_quadratic_on_eligible_cells_only(self, interior6, uniform6):
        """x^2 is reproduced where nine interior functions meet, and missed near the boundary."""
        square = P2Poly.from_global([0, 0, 0, 1, 0, 0])
        eligible = eligible_cells(interior6)
        assert sorted(eligible) == [(i, j) for i in range(2, 4) for j in range(2, 4)]
        assert reproduction_residual(interior6, square, cells=eligible) <= 1e-11
        others = [c for c in uniform6.active_cells if c not in set(eligible)]
        assert reproduction_residual(interior6, square, cells=others) >= 1e-6

    @pytest.mark.parametrize("name", ["uniform6", "pattern2"])
    def test_extended_reproduces_quadratics(self, request, rng, name):
        grid = request.getfixturevalue(name)
        extended = build_extended_set(grid, classify(grid))
        assert reproduction_residual(extended, random_p2(rng), cells=grid.active_cells) <= 1e-11

    def test_linearity(self, interior6, rng):
        u, w = random_p2(rng), random_p2(rng)
        cu, _ = interpolate_h0(interior6, u)
        cw, _ = interpolate_h0(interior6, w)
        cuw, _ = interpolate_h0(interior6, lambda x, y: 2.0 * u(x, y) - 3.0 * w(x, y))
        np.testing.assert_allclose(cuw.values, 2.0 * cu.values - 3.0 * cw.values, atol=1e-12)

    def test_wrong_basis_kind(self, interior6, extended6):
        with pytest.raises(ValidationError):
            interpolate_extended(interior6, lambda x, y: x)
        with pytest.raises(ValidationError):
            interpolate_h0(extended6, lambda x, y: x)

    def test_field_matches_coefficients(self, interior6):
        """The returned field is the coefficient combination of the basis."""
        coeffs, fieldv = interpolate_h0(interior6, get_example(1).value)
        cell = (2, 2)
        expected = sum(coeffs.values[k] * interior6.functions[k].support[cell](0.4, 0.4)
                       for k in interior6.covering[cell])
        assert fieldv.value(np.array([0.4]), np.array([0.4]))[0] == pytest.approx(expected)


class TestProjection:
    """Test that the interior operator is not a projection."""

    def test_uniform_defect(self, interior6):
        """On a uniform patch lambda_K(phi_K) = 11/18."""
        assert projection_defect(interior6, (3, 3)) == pytest.approx(7 / 18, abs=1e-10)

    def test_defect_is_large_everywhere(self, interior6):
        assert min(projection_defect(interior6, c) for c in interior6.centers) > 1e-3


class TestStability:
    """Test the local stability constants."""

    def test_constants_are_finite(self, extended6):
        constants = stability_constants(extended6, lambda x, y: np.sin(3 * x) * np.cos(2 * y))
        assert set(constants) == {0, 1, 2}
        for value in constants.values():
            assert np.isfinite(value) and value > 0

    def test_interior_basis_rejected(self, interior6):
        with pytest.raises(ValidationError):
            stability_constants(interior6, lambda x, y: x)

    def test_lattice_locator(self, uniform4):
        locate = lattice_locator(uniform4)
        i, j = locate(np.array([-0.1, 1.2]), np.array([0.3, 0.1]))
        assert list(i) == [-1, 4]
        assert list(j) == [1, 0]


@pytest.mark.slow
class TestInterpolationRates:
    """Test interpolation error rates on the bump."""

    def test_h_sweep(self):
        """Broken H1 error O(h^2) and H2 error O(h)."""
        example = get_example(1)
        hs, e1, e2 = [], [], []
        for n in (8, 16, 32):
            grid = build_uniform(n=n)
            _, fieldv = interpolate_h0(build_interior_set(grid, classify(grid)), example.value)
            row = energy_error(fieldv, example, 0.0)
            hs.append(grid.h)
            e1.append(row.rel_h1)
            e2.append(row.rel_h2)
        assert rate_fit(e1, hs) == pytest.approx(2.0, abs=0.15)
        assert rate_fit(e2, hs) == pytest.approx(1.0, abs=0.15)
