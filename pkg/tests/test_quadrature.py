"""
Tests for grids and tube quadrature.
"""

import math

import pytest
import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.coefficients.materials import reference_function
from src.coefficients.params import CapacityParams
from src.exceptions import DomainError
from src.geometry.chart import TubeChart
from src.geometry.curves import make_arc, make_segment
from src.mesh.grids import Grid1D, Grid3D
from src.mesh.quadrature import (
    QuadratureDensity,
    Region,
    box_integral,
    capacity_limit_target,
    capacity_pairing,
    collar_measure_flat,
    disk_average,
    disk_nodes,
    gap_measure,
    gap_measure_monte_carlo,
    gauss,
    line_delta_weights,
    tube_integral,
    tube_nodes,
)
from src.solvers.approx import BulkField


class TestGrids:
    """Tests for Grid3D and Grid1D."""

    def test_cell_centers_and_volume(self):
        grid = Grid3D.cube(4)
        assert grid.n_cells == 64
        assert grid.cell_volume == pytest.approx(1 / 64)
        np.testing.assert_allclose(grid.cell_centers()[0], [0.125, 0.125, 0.125])

    def test_locate(self):
        grid = Grid3D.cube(4)
        idx = grid.locate(np.array([[0.1, 0.1, 0.1], [1.0, 1.0, 1.0], [1.2, 0.5, 0.5]]))
        assert idx[0] == 0
        assert idx[1] == 63
        assert idx[2] == -1

    def test_gradient_of_linear_field(self):
        grid = Grid3D.cube(6)
        x = grid.cell_centers()
        g = grid.gradient(x[:, 0] - 3 * x[:, 2])
        np.testing.assert_allclose(g, np.broadcast_to([1.0, 0.0, -3.0], g.shape), atol=1e-12)

    def test_degenerate_axis(self):
        grid = Grid3D(((0, 1), (0, 1), (0, 1)), (8, 1, 1))
        assert grid.n_cells == 8
        np.testing.assert_array_equal(grid.gradient(np.ones(8))[:, 1], np.zeros(8))

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            Grid3D(((0, 1), (1, 1), (0, 1)), (2, 2, 2))

    def test_curve_mesh(self):
        grid1 = Grid1D(5)
        assert grid1.spacing == pytest.approx(0.25)
        assert grid1.control_lengths.sum() == pytest.approx(1.0)
        assert grid1.integrate(grid1.nodes) == pytest.approx(0.5)
        with pytest.raises(ValueError):
            Grid1D(1)


class TestRules:
    """Tests for Gauss and disk rules."""

    def test_gauss_exact_for_polynomials(self):
        x, w = gauss(4, 0.0, 2.0)
        assert np.sum(w * x ** 7) == pytest.approx(2 ** 8 / 8, rel=1e-12)

    def test_disk_weights(self):
        nu, om, w = disk_nodes(0.3, 8, 16)
        assert w.sum() == pytest.approx(math.pi * 0.09, rel=1e-12)
        assert np.hypot(nu, om).max() < 0.3

    def test_density_validation(self):
        with pytest.raises(ValueError):
            QuadratureDensity(n_collar=4)

    def test_density_resolving(self):
        density = QuadratureDensity(n_radial=4, n_angular=8, n_axial=16).resolving(0.125, 0.5, 1.0, 3)
        assert density.n_radial == 12
        assert density.n_axial == 24
        assert density.n_angular == 76

    def test_region_needs_params(self):
        with pytest.raises(ValueError):
            tube_nodes(Region.CORE, 0.1)

    def test_box_integral(self):
        value = box_integral(lambda x: x[..., 0] * x[..., 1], ((0, 1), (0, 2), (0, 1)), n=4)
        assert value == pytest.approx(1.0, rel=1e-12)


class TestTubeIntegrals:
    """Tests for tube integrals and the collar measure."""

    @pytest.fixture
    def segment_chart(self):
        return TubeChart(make_segment(), eps0=0.1)

    @pytest.fixture
    def arc_chart(self):
        return TubeChart(make_arc(), eps0=0.1)

    def test_full_tube_volume_segment(self, segment_chart):
        ones = lambda t, s, nu, om: np.ones_like(s)
        volume = tube_integral(segment_chart, ones, 0.0, Region.FULL_TUBE)
        assert volume == pytest.approx(math.pi * 0.01, rel=1e-9)

    def test_full_tube_volume_arc(self, arc_chart):
        # Pappus: J_F = R - nu averages to R over the disk
        ones = lambda t, s, nu, om: np.ones_like(s)
        volume = tube_integral(arc_chart, ones, 0.0, "full-tube")
        assert volume == pytest.approx(0.3 * math.pi * 0.01, rel=1e-8)

    def test_core_volume(self, segment_chart):
        p = CapacityParams(0.1, 0.05, 0.01)
        ones = lambda t, s, nu, om: np.ones_like(s)
        assert tube_integral(segment_chart, ones, 0.0, Region.CORE, p=p) == pytest.approx(math.pi * 0.0025, rel=1e-9)

    def test_collar_quadrature_matches_exact(self, segment_chart):
        p = CapacityParams(0.1, 0.05, 0.01)
        flat, mapped = gap_measure(segment_chart, p, 0.0)
        exact = collar_measure_flat(p.eps, p.delta)
        assert flat == pytest.approx(exact, rel=1e-10)
        assert mapped == pytest.approx(exact, rel=1e-8)

    def test_collar_measure_scales_with_delta(self):
        ratios = [collar_measure_flat(0.05, d) / d for d in (0.01, 0.005, 0.0025)]
        assert max(ratios) / min(ratios) < 1.1

    def test_monte_carlo_collar(self):
        p = CapacityParams(0.1, 0.05, 0.01)
        estimate = gap_measure_monte_carlo(p, n_samples=400_000, seed=42, chunk=100_000)
        assert estimate == pytest.approx(collar_measure_flat(p.eps, p.delta), rel=0.05)


class TestCapacityPairing:
    """Tests for the capacity pairing and its line limit."""

    @pytest.fixture
    def chart(self):
        return TubeChart(make_segment(), eps0=0.1)

    @pytest.fixture
    def grid(self):
        return Grid3D.cube(8)

    def test_limit_target(self, chart, grid):
        target = capacity_limit_target(chart, reference_function("const"), 0.0, grid)
        assert target == pytest.approx(1.0314159, abs=1e-7)

    def test_tube_pairing(self, chart, grid):
        p = CapacityParams(0.1, 0.05, 1e-4)
        pairing = capacity_pairing(chart, p, reference_function("const"), 0.0, grid)
        assert pairing == pytest.approx(1.0 + math.pi * (0.01 - 0.0025), abs=2e-4)

    def test_grid_pairing_matches_tube(self, chart, grid):
        p = CapacityParams(0.1, 0.05, 1e-4)
        f = reference_function("const")
        tube = capacity_pairing(chart, p, f, 0.0, grid, mode="tube")
        cells = capacity_pairing(chart, p, f, 0.0, grid, mode="grid")
        assert cells == pytest.approx(tube, abs=1e-8)

    def test_unknown_mode(self, chart, grid):
        p = CapacityParams(0.1, 0.05, 1e-4)
        with pytest.raises(ValueError):
            capacity_pairing(chart, p, reference_function("const"), 0.0, grid, mode="spectral")


class TestAverages:
    """Tests for disk averages and the line-delta weights."""

    @pytest.fixture
    def chart(self):
        return TubeChart(make_segment(), eps0=0.1)

    def test_disk_average_constant(self, chart):
        grid = Grid3D.cube(8)
        field = BulkField(grid, np.full(grid.n_cells, 2.0))
        value, grad = disk_average(chart, field, 0.0, 0.5, 0.05)
        assert value == pytest.approx(2.0)
        np.testing.assert_allclose(grad, np.zeros(3), atol=1e-12)

    def test_disk_average_linear(self, chart):
        grid = Grid3D.cube(16)
        field = BulkField.sample(grid, lambda x: x[:, 0] + 2 * x[:, 1])
        value, grad = disk_average(chart, field, 0.0, np.array([0.25, 0.5]), 0.05)
        np.testing.assert_allclose(value, [1.25, 1.5], atol=1e-10)
        np.testing.assert_allclose(grad, [[1.0, 2.0, 0.0], [1.0, 2.0, 0.0]], atol=1e-9)

    def test_disk_leaving_domain(self):
        chart = TubeChart(make_segment(origin=(0.0, 0.5, 0.05)), eps0=0.1, validate=False)
        field = BulkField(Grid3D.cube(4), np.ones(64))
        with pytest.raises(DomainError):
            disk_average(chart, field, 0.0, 0.5, 0.08)

    def test_line_delta_columns_normalised(self, chart):
        grid = Grid3D.cube(8)
        grid1 = Grid1D(5)
        W = line_delta_weights(chart, grid, grid1, 0.0, 0.1)
        assert W.shape == (grid.n_cells, 5)
        np.testing.assert_allclose(np.asarray(W.sum(axis=0)).ravel(), 1.0, atol=1e-12)
        np.testing.assert_allclose(W.T @ np.full(grid.n_cells, 3.0), 3.0, atol=1e-12)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
