"""Tests for the projectivity test and dual functionals on RRM families."""

import numpy as np
import pytest

from src.analysis.projection import (
    Decision,
    LocalBasisFamily,
    RRMFamily,
    Subdomain,
    build_dual_functionals,
    cells_subdomain,
    checkerboard_distance,
    completely_subdomain_check,
    duality_defect,
    projectivity_test,
    rrm_center_selection,
    rrm_domain_selection,
    run_family,
)
from src.core.exceptions import DegenerateSubdomain, ValidationError
from src.fem.basis import build_extended_set, build_interior_set
from src.fem.mesh import classify


@pytest.fixture(scope="module")
def covered_centers(uniform6):
    classification = classify(uniform6)
    return [c for c in uniform6.active_cells if completely_subdomain_check(uniform6, classification, [c])]


@pytest.fixture(scope="module")
def pattern2_extended(pattern2):
    return build_extended_set(pattern2, classify(pattern2))


@pytest.fixture(scope="module")
def interior4(uniform4):
    return build_interior_set(uniform4, classify(uniform4))


class TestCompletelyCovered:
    """Test the nine-interior-patch condition."""

    def test_central_cells(self, uniform6, covered_centers):
        assert sorted(covered_centers) == [(2, 2), (2, 3), (3, 2), (3, 3)]

    def test_rejections(self, uniform6):
        classification = classify(uniform6)
        assert not completely_subdomain_check(uniform6, classification, [(1, 1)])
        assert not completely_subdomain_check(uniform6, classification, [(2, 2), (0, 0)])
        assert not completely_subdomain_check(uniform6, classification, [])


class TestRRMProjectivity:
    """Test rank decisions on RRM families."""

    def test_extended_family_is_representable(self, extended6, covered_centers):
        """On a covered cell phi_K is a combination of its eight neighbours."""
        family = RRMFamily(extended6)
        selection = rrm_center_selection(extended6, covered_centers)
        for result in run_family(family, selection):
            assert result.decision == Decision.REPRESENTABLE
            assert result.residual <= 1e-10
            assert len(result.overlapping) == 9
            assert len(result.witness) == 8
            assert result.dependencies.shape == (9, 3)
            assert checkerboard_distance(extended6, result) <= 1e-9

    @pytest.mark.parametrize("name", ["extended6", "pattern2_extended"])
    def test_witness_is_checkerboard(self, request, name):
        """[1, -g_j] over the overlapping ids is the normalized checkerboard vector up to sign."""
        basis = request.getfixturevalue(name)
        grid, classification = basis.grid, basis.classification
        centers = [c for c in grid.active_cells if completely_subdomain_check(grid, classification, [c])]
        assert centers
        selection = rrm_center_selection(basis, centers)
        board_all = basis.checkerboard_vector()
        for result in run_family(RRMFamily(basis), selection):
            assert result.representable
            combo = np.array([1.0] + [-result.witness[j] for j in result.overlapping[1:]])
            combo /= np.linalg.norm(combo)
            board = board_all[result.overlapping]
            board = board / np.linalg.norm(board)
            gap = min(np.linalg.norm(combo - board), np.linalg.norm(combo + board))
            assert gap <= 1e-9

    def test_witness_reproduces_function(self, extended6, covered_centers):
        family = RRMFamily(extended6)
        selection = rrm_center_selection(extended6, covered_centers)
        k = sorted(selection)[0]
        result = projectivity_test(family, selection, k)
        region = selection[k]
        combination = sum(g * family.evaluate(j, region) for j, g in result.witness.items())
        np.testing.assert_allclose(combination, family.evaluate(k, region), atol=1e-10)

    @pytest.mark.parametrize("tol", [1e-12, 1e-9, 1e-6])
    def test_decision_is_tolerance_robust(self, extended6, covered_centers, tol):
        selection = rrm_center_selection(extended6, covered_centers)
        results = run_family(RRMFamily(extended6), selection, tol)
        assert all(r.representable for r in results)

    def test_domain_selection_is_not_representable(self, interior4):
        results = run_family(RRMFamily(interior4), rrm_domain_selection(interior4))
        assert len(results) == 4
        assert not any(r.representable for r in results)
        assert all(r.witness == {} for r in results)

    def test_duals_on_domain(self, interior4):
        family = RRMFamily(interior4)
        duals = build_dual_functionals(family, rrm_domain_selection(interior4))
        assert set(duals) == {0, 1, 2, 3}
        assert duality_defect(family, duals) <= 1e-9

    def test_dual_pairing_recovers_coefficients(self, interior4):
        """Pairing the dual of phi_k with sum c_j phi_j returns c_k."""
        family = RRMFamily(interior4)
        duals = build_dual_functionals(family, rrm_domain_selection(interior4))
        c = np.array([0.5, -1.0, 2.0, 0.25])

        def sampler(points, cells):
            values = np.zeros(len(points))
            for k, fn in enumerate(interior4.functions):
                for cell, poly in fn.support.items():
                    mask = np.array([tuple(o) == cell for o in cells])
                    if mask.any():
                        values[mask] += c[k] * poly(points[mask, 0], points[mask, 1])
            return values

        recovered = [duals[k].apply(family, sampler) for k in range(4)]
        np.testing.assert_allclose(recovered, c, atol=1e-9)

    def test_duals_need_non_representable_functions(self, extended6, covered_centers):
        with pytest.raises(ValidationError):
            build_dual_functionals(RRMFamily(extended6), rrm_center_selection(extended6, covered_centers))


class TestSubdomains:
    """Test subdomain construction and validation."""

    def test_cells_subdomain(self, uniform4):
        region = cells_subdomain(uniform4, [(0, 0), (1, 0)])
        assert region.area == pytest.approx(2 / 16)
        assert region.owner_keys == [(0, 0), (1, 0)]

    def test_invalid_cells(self, uniform4):
        with pytest.raises(ValidationError):
            cells_subdomain(uniform4, [(4, 4)])
        with pytest.raises(DegenerateSubdomain):
            cells_subdomain(uniform4, [])

    def test_zero_area_region(self, interior4):
        region = Subdomain(np.zeros((1, 2)), np.zeros(1), np.zeros(1, dtype=int), [(1, 1)])
        with pytest.raises(DegenerateSubdomain):
            projectivity_test(RRMFamily(interior4), {0: region}, 0)

    def test_missing_selection(self, interior4):
        with pytest.raises(ValidationError):
            projectivity_test(RRMFamily(interior4), {}, 0)

    def test_family_is_abstract(self):
        with pytest.raises(TypeError):
            LocalBasisFamily()
