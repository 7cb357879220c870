"""Tests for rectangles, quadratic pieces, Gauss rules and Morley fits."""

import numpy as np
import pytest

from src.core.exceptions import InconsistentDofs, ValidationError
from src.fem.polynomial import (
    MorleyDofs,
    P2Poly,
    Rect,
    cell_mean,
    fit_p2_from_morley,
    gauss_rect,
    gauss_rects,
    morley_dofs,
    reference_gauss,
)


class TestRect:
    """Test rectangle geometry."""

    def test_geometry(self):
        """Sizes, center and shape measures."""
        rect = Rect(0.0, 0.0, 2.0, 1.0)
        assert rect.width == 2.0
        assert rect.height == 1.0
        assert rect.center == (1.0, 0.5)
        assert rect.area == 2.0
        assert rect.h == 2.0
        assert rect.rho == 0.5

    def test_vertex_and_edge_order(self):
        """Vertices LL, LR, UL, UR and edges bottom, top, left, right."""
        rect = Rect(0.0, 0.0, 2.0, 1.0)
        np.testing.assert_array_equal(rect.vertices(), [[0, 0], [2, 0], [0, 1], [2, 1]])
        np.testing.assert_array_equal(rect.edge_midpoints(), [[1, 0], [1, 1], [0, 0.5], [2, 0.5]])

    def test_degenerate_rect_rejected(self):
        """Zero width is invalid."""
        with pytest.raises(ValidationError):
            Rect(0.0, 0.0, 0.0, 1.0)


class TestP2Poly:
    """Test quadratic pieces."""

    def test_global_evaluation(self):
        """1 + 2x + 3y + 4x^2 + 5xy + 6y^2 at (0.5, -1)."""
        p = P2Poly.from_global([1, 2, 3, 4, 5, 6])
        assert p(0.5, -1.0) == pytest.approx(3.5)

    def test_rebase_keeps_values(self, rng):
        """Changing the frame does not change the function."""
        p = P2Poly.from_global(rng.uniform(-1, 1, 6))
        q = p.rebase((0.3, 0.7), 0.25)
        x, y = rng.uniform(-1, 2, 20), rng.uniform(-1, 2, 20)
        np.testing.assert_allclose(q(x, y), p(x, y), atol=1e-12)
        np.testing.assert_allclose(q.global_coefficients(), p.coeffs, atol=1e-12)

    def test_derivatives(self):
        """Gradient and Hessian of a global quadratic."""
        p = P2Poly.from_global([1, 2, 3, 4, 5, 6], Rect(1.0, 1.0, 1.5, 2.0))
        gx, gy = p.grad(1.0, 2.0)
        assert gx == pytest.approx(2 + 8 * 1.0 + 5 * 2.0)
        assert gy == pytest.approx(3 + 5 * 1.0 + 12 * 2.0)
        np.testing.assert_allclose(p.hessian(), [[8, 5], [5, 12]], atol=1e-12)

    def test_arithmetic_across_frames(self):
        """Sums rebase the right operand into the left frame."""
        rect = Rect(2.0, 2.0, 3.0, 3.0)
        p = P2Poly.from_global([0, 0, 0, 1, 0, 0], rect)
        q = P2Poly.from_global([1, 0, 0, 0, 0, 0])
        total = p + 2 * q
        assert total.center == rect.center
        assert total(2.5, 2.2) == pytest.approx(2.5 ** 2 + 2.0)
        assert (p - p)(2.1, 2.9) == pytest.approx(0.0, abs=1e-14)

    def test_seminorms(self):
        """x^2 on the unit square."""
        rect = Rect(0.0, 0.0, 1.0, 1.0)
        p = P2Poly.from_global([0, 0, 0, 1, 0, 0], rect)
        assert p.seminorm(rect, 0) == pytest.approx(np.sqrt(1 / 5))
        assert p.seminorm(rect, 1) == pytest.approx(np.sqrt(4 / 3))
        assert p.seminorm(rect, 2) == pytest.approx(2.0)
        with pytest.raises(ValidationError):
            p.seminorm(rect, 3)


class TestQuadrature:
    """Test tensor Gauss rules."""

    def test_exactness(self):
        """n points per direction integrate degree 2n - 1 exactly."""
        rect = Rect(0.0, 0.0, 1.0, 1.0)
        assert gauss_rect(rect, 2).integrate_function(lambda x, y: x ** 3 * y ** 3) == pytest.approx(1 / 16)
        assert gauss_rect(rect, 3).integrate_function(lambda x, y: x ** 5) == pytest.approx(1 / 6)

    def test_batched_rules_match(self):
        """gauss_rects reproduces gauss_rect cell by cell."""
        rects = [Rect(0.0, 0.0, 0.5, 0.25), Rect(-1.0, 2.0, 0.0, 2.5)]
        X, Y, W = gauss_rects(np.array([r.bounds for r in rects]), 3)
        for k, rect in enumerate(rects):
            rule = gauss_rect(rect, 3)
            np.testing.assert_allclose(X[k], rule.x)
            np.testing.assert_allclose(Y[k], rule.y)
            np.testing.assert_allclose(W[k], rule.weights)

    def test_cell_mean(self):
        """Mean of x over [1, 3] x [0, 1]."""
        assert cell_mean(Rect(1.0, 0.0, 3.0, 1.0), lambda x, y: x) == pytest.approx(2.0)

    def test_invalid_order(self):
        """Order zero is rejected."""
        with pytest.raises(ValidationError):
            reference_gauss(0)


class TestMorleyFit:
    """Test the eight-value Morley fit."""

    @pytest.mark.parametrize("bounds", [(0.0, 0.0, 1.0, 1.0), (0.2, -0.4, 0.5, 0.6), (1e-3, 0.0, 1.3e-3, 2e-3)])
    def test_quadratics_are_reproduced(self, rng, bounds):
        """Exact Morley data of a quadratic give the quadratic back."""
        rect = Rect(*bounds)
        p = P2Poly.on_rect(rect, rng.uniform(-1, 1, 6))
        fitted, residual = fit_p2_from_morley(rect, morley_dofs(p, rect))
        assert residual <= 1e-12
        x, y = rect.sample(4)
        np.testing.assert_allclose(fitted(x, y), p(x, y), atol=1e-12)

    def test_inconsistent_data_raise(self):
        """A single unit vertex value with zero normal means fits no quadratic."""
        rect = Rect(-0.5, -0.5, 0.5, 0.5)
        with pytest.raises(InconsistentDofs) as err:
            fit_p2_from_morley(rect, MorleyDofs([1, 0, 0, 0], [0, 0, 0, 0]))
        assert err.value.residual > 0.1
