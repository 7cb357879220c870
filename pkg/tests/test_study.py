"""Tests for the closed-form examples, error norms, rates and table checks."""

import numpy as np
import pytest

from src.analysis.manufactured import EXAMPLES, get_example
from src.analysis.study import (
    ConvergenceRow,
    ConvergenceTable,
    check_against_published,
    energy_error,
    pairwise_rates,
    rate_fit,
    run_convergence,
    table_to_csv,
    write_csv,
)
from src.config import PUBLISHED_TABLES
from src.core.exceptions import InsufficientData, ValidationError
from src.fem.basis import build_extended_set
from src.fem.fields import field_from_coefficients
from src.fem.interpolation import interpolate_extended
from src.fem.mesh import classify
from src.fem.polynomial import P2Poly


class PolyReference:
    """A global quadratic with the reference interface."""

    def __init__(self, poly: P2Poly):
        self.poly = poly

    def value(self, x, y):
        return self.poly(x, y)

    def gradient(self, x, y):
        return self.poly.grad(x, y)

    def hessian(self, x, y):
        H = self.poly.hessian()
        shape = np.shape(x)
        return np.full(shape, H[0, 0]), np.full(shape, H[0, 1]), np.full(shape, H[1, 1])


def published_table(number, eps_exponent=0, scale=1.0):
    """ConvergenceTable filled with a published row."""
    published = PUBLISHED_TABLES[number]
    errors, rate = published["rows"][eps_exponent]
    eps = 2.0 ** -eps_exponent
    rows = [
        ConvergenceRow(eps=eps, h=h, rel_energy=e * scale, rel_h1=e, rel_h2=e, rel_l2=e)
        for h, e in zip(published["h"], errors)
    ]
    return ConvergenceTable(
        example_id=published["example"], mesh_kind=published["mesh"], rows=rows,
        rates={eps: rate_fit([r.rel_energy for r in rows], [r.h for r in rows])},
    )


class TestExamples:
    """Test the closed-form examples."""

    @pytest.mark.parametrize("example_id", [1, 2])
    def test_clamped_boundary(self, example_id):
        """u and its gradient vanish on the boundary lines of the domain."""
        example = get_example(example_id)
        t = np.linspace(0.0, 1.0, 11)
        top = 1.0 if example_id == 1 else 2.0
        for x, y in ((t, 0 * t), (t, 0 * t + top), (0 * t, t), (0 * t + top, t), (t + 1.0, 0 * t + 1.0)):
            if example_id == 1 and np.any(x > 1.0):
                continue
            assert np.max(np.abs(example.value(x, y))) <= 1e-14
            gx, gy = example.gradient(x, y)
            assert max(np.max(np.abs(gx)), np.max(np.abs(gy))) <= 1e-14

    def test_second_order_source(self, rng):
        """f2 = -Laplacian of u."""
        example = get_example(1)
        x, y = rng.uniform(0, 1, 20), rng.uniform(0, 1, 20)
        hxx, _, hyy = example.hessian(x, y)
        np.testing.assert_allclose(example.f2(x, y), -(hxx + hyy), rtol=1e-12, atol=1e-12)

    def test_fourth_order_source(self, rng):
        """f4 = -Laplacian of f2, by a five-point difference."""
        example = get_example(1)
        x, y = rng.uniform(0.1, 0.9, 10), rng.uniform(0.1, 0.9, 10)
        d = 1e-3
        lap = (example.f2(x + d, y) + example.f2(x - d, y) + example.f2(x, y + d)
               + example.f2(x, y - d) - 4.0 * example.f2(x, y)) / d ** 2
        np.testing.assert_allclose(example.f4(x, y), -lap, rtol=1e-4, atol=5e-2)

    def test_boundary_layer_example(self, rng):
        """Example 3 has no fourth-order source and f = -Laplacian of its reference."""
        example = get_example(3)
        assert not example.reference_is_exact
        x, y = rng.uniform(0, 1, 10), rng.uniform(0, 1, 10)
        hxx, _, hyy = example.hessian(x, y)
        np.testing.assert_allclose(example.source(0.1)(x, y), -(hxx + hyy), rtol=1e-12)

    def test_unknown_example(self):
        with pytest.raises(ValidationError):
            get_example(4)
        assert set(EXAMPLES) == {1, 2, 3}


class TestErrors:
    """Test relative error norms."""

    def test_zero_field(self, interior6):
        """The zero field has relative error one in every norm."""
        zero = field_from_coefficients(interior6, np.zeros(len(interior6)))
        row = energy_error(zero, get_example(1), 0.5)
        for value in (row.rel_energy, row.rel_h1, row.rel_h2, row.rel_l2):
            assert value == pytest.approx(1.0)

    def test_reproduced_quadratic(self, uniform6, rng):
        """The extended interpolant of a quadratic has no error."""
        poly = P2Poly.from_global(rng.uniform(-1, 1, 6))
        extended = build_extended_set(uniform6, classify(uniform6))
        _, fieldv = interpolate_extended(extended, poly)
        row = energy_error(fieldv, PolyReference(poly), 1.0)
        assert row.rel_energy <= 1e-10
        assert row.h == pytest.approx(1 / 6)


class TestRates:
    """Test rate fits."""

    def test_exact_power_law(self):
        hs = [0.25, 0.125, 0.0625]
        assert rate_fit([h ** 2 for h in hs], hs) == pytest.approx(2.0)
        np.testing.assert_allclose(pairwise_rates([0.4, 0.1, 0.025], [1.0, 0.5, 0.25]), [2.0, 2.0])

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            rate_fit([0.1], [0.5])
        with pytest.raises(InsufficientData):
            rate_fit([0.1, 0.2], [0.5, 0.5])

    def test_invalid_data(self):
        with pytest.raises(ValidationError):
            rate_fit([0.1, 0.0], [0.5, 0.25])
        with pytest.raises(ValidationError):
            rate_fit([0.1, 0.2], [0.5])


class TestTableCheck:
    """Test the comparison with published tables."""

    def test_published_values_pass(self):
        failures, notes = check_against_published(published_table(2))
        assert failures == []
        assert notes == []

    def test_uniform_errors_gate(self):
        failures, _ = check_against_published(published_table(2, scale=1.1))
        assert len(failures) == 5

    def test_pattern_errors_are_notes(self):
        """Pattern tables gate on the rate and only report error offsets."""
        failures, notes = check_against_published(published_table(1, scale=1.3))
        assert failures == []
        assert len(notes) == 5

    def test_missing_table(self):
        table = ConvergenceTable(example_id=9, mesh_kind="uniform")
        failures, _ = check_against_published(table)
        assert len(failures) == 1


class TestConvergenceRun:
    """Test a coarse convergence run."""

    def test_coarse_uniform_run(self, fresh_cache):
        """h = 1/4 and 1/8 at eps = 1 against the published errors."""
        table = run_convergence(1, "uniform", eps_list=[1.0], levels=[2, 3])
        assert [r.h for r in table.rows] == [0.25, 0.125]
        assert [r.dofs for r in table.rows] == [4, 36]
        assert table.rows[0].rel_energy == pytest.approx(0.5403, rel=0.02)
        assert table.rows[1].rel_energy == pytest.approx(0.2754, rel=0.02)
        assert 0.8 < table.rates[1.0] < 1.2
        assert len(table.pairwise_rates[1.0]) == 1

    def test_cache_reuse(self, fresh_cache):
        """A second eps sweep reuses the cached basis and system."""
        run_convergence(1, "uniform", eps_list=[1.0], levels=[2])
        hits = fresh_cache.get_cache_stats()["hits"]
        table = run_convergence(1, "uniform", eps_list=[0.25], levels=[2])
        assert fresh_cache.get_cache_stats()["hits"] >= hits + 2
        assert table.rates == {}

    def test_interpolation_column(self, fresh_cache):
        table = run_convergence(1, "uniform", eps_list=[1.0], levels=[2], with_interpolation=True)
        assert table.rows[0].interp_energy is not None
        assert table.rows[0].interp_energy > 0.0

    def test_invalid_mesh(self):
        with pytest.raises(ValidationError):
            run_convergence(1, "random")

    def test_csv(self, fresh_cache, tmp_path):
        table = run_convergence(1, "uniform", eps_list=[1.0], levels=[2, 3])
        text = table_to_csv(table)
        lines = text.strip().splitlines()
        assert lines[0] == "eps,h,rel_energy,rel_h1,rel_h2,rel_l2"
        assert len(lines) == 4
        assert lines[-1].startswith("# rate eps=1.000000e+00 value=")
        path = write_csv(table, str(tmp_path / "table.csv"))
        assert open(path, encoding="utf-8").read() == text
