"""
Tests for the coupled bulk/curve limit solver and the weak residual.
"""

import pytest
import numpy as np
import pandas as pd

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.coefficients.materials import scalar_bump, scalar_constant, tube_constant, vector_constant
from src.coefficients.params import MaterialParams
from src.exceptions import DomainError
from src.geometry.chart import TubeChart
from src.geometry.curves import make_segment, make_translating_segment
from src.mesh.grids import Grid1D, Grid3D
from src.solvers.approx import SolveConfig
from src.solvers.limit import (
    CurveField,
    LimitConfig,
    LimitSolver,
    function_basket,
    run_limit,
    weak_residual,
    xi_closure,
)
from src.solvers.output import limit_timeseries, write_snapshots


def make_material(u0=None, v_C=(0.0, 0.0, 0.0)):
    return MaterialParams(
        k0=1.0,
        k_s=tube_constant(2.0),
        k_n=tube_constant(1.0),
        theta=0.5,
        v=vector_constant((0.0, 0.0, 0.0)),
        v_C=vector_constant(v_C),
        u0=u0 or scalar_bump(width=0.2),
    )


@pytest.fixture
def grid():
    return Grid3D.cube(8)


@pytest.fixture
def grid1():
    return Grid1D(9)


@pytest.fixture
def solve():
    return SolveConfig(dt=0.01, t_end=0.03)


class TestLimitConfig:
    """Tests for LimitConfig."""

    def test_resolve_caps_radius(self, grid):
        r_avg, lam = LimitConfig(r_avg_cells=2.0).resolve(grid, k0=1.0, eps0=0.1)
        assert r_avg == pytest.approx(0.1)
        assert lam == pytest.approx(100.0)

    def test_explicit_exchange(self, grid):
        r_avg, lam = LimitConfig(r_avg_cells=0.5, lambda_ex=3.0).resolve(grid, k0=1.0, eps0=0.1)
        assert r_avg == pytest.approx(0.0625)
        assert lam == 3.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            LimitConfig(n_s=1)
        with pytest.raises(ValueError):
            LimitConfig(lambda_ex=-1.0)


class TestLimitSolver:
    """Tests for LimitSolver runs."""

    def test_total_mass_conserved(self, grid, grid1, solve):
        chart = TubeChart(make_translating_segment(), eps0=0.1)
        traj = LimitSolver(chart, make_material(v_C=(0.3, 0.0, 0.0)), grid, grid1, solve).run()
        mass = traj.records["mass"].to_numpy()
        assert np.max(np.abs(mass - mass[0])) <= 1e-8 * abs(mass[0])
        assert len(traj.bulk) == len(traj.curve) == len(traj.xi) == 4

    def test_mass_moves_between_bulk_and_curve(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        m = make_material(u0=scalar_bump(center=(0.5, 0.2, 0.5), width=0.1))
        traj = LimitSolver(chart, m, grid, grid1, solve).run()
        assert traj.records["exchange"].iloc[1:].abs().max() > 0

    def test_constants_preserved_static(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        traj = LimitSolver(chart, make_material(u0=scalar_constant(1.5)), grid, grid1, solve).run()
        np.testing.assert_allclose(traj.bulk[-1].values, 1.5, atol=1e-9)
        np.testing.assert_allclose(traj.curve[-1].values, 1.5, atol=1e-9)

    def test_constants_preserved_when_following_curve(self, grid, grid1, solve):
        chart = TubeChart(make_translating_segment(speed=0.2), eps0=0.1)
        m = make_material(u0=scalar_constant(1.5), v_C=(0.0, 0.2, 0.0))
        traj = LimitSolver(chart, m, grid, grid1, solve).run()
        np.testing.assert_allclose(traj.bulk[-1].values, 1.5, atol=1e-9)
        np.testing.assert_allclose(traj.curve[-1].values, 1.5, atol=1e-9)
        for xi in traj.xi:
            np.testing.assert_allclose(xi.nu, 0.0, atol=1e-8)
            np.testing.assert_allclose(xi.om, 0.0, atol=1e-8)

    def test_xi_for_curve_moving_through_still_medium(self, grid1):
        chart = TubeChart(make_translating_segment(speed=0.2), eps0=0.1)
        uc = CurveField(grid1, np.full(grid1.n_s, 2.0), time=0.5)
        xi = xi_closure(chart, make_material(), uc)
        np.testing.assert_allclose(xi.nu, -0.4, atol=1e-8)
        np.testing.assert_allclose(xi.om, 0.0, atol=1e-8)

    def test_eps0_above_chart_radius(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        with pytest.raises(ValueError):
            LimitSolver(chart, make_material(), grid, grid1, solve, eps0=0.2)

    def test_t_end_beyond_curve_time(self, grid, grid1):
        chart = TubeChart(make_segment(t_final=0.02), eps0=0.1)
        with pytest.raises(DomainError):
            LimitSolver(chart, make_material(), grid, grid1, SolveConfig(dt=0.01, t_end=0.03))

    def test_curve_frame_and_outputs(self, grid, grid1, solve, tmp_path):
        chart = TubeChart(make_segment(), eps0=0.1)
        traj = run_limit(solve, chart, 0.1, make_material(), grid, grid1)
        frame = traj.curve_frame()
        assert list(frame.columns) == ["time", "s", "u_C", "xi_nu", "xi_omega"]
        assert len(frame) == 4 * grid1.n_s

        paths = limit_timeseries(traj, tmp_path / "limit.csv", tmp_path / "curve.csv")
        assert all(p.exists() for p in paths)
        assert list(pd.read_csv(paths[0]).columns)[:4] == ["time", "bulk_mass", "curve_mass", "mass"]

        vtk = write_snapshots(traj.bulk[:2], tmp_path / "vtk")
        assert len(vtk) == 2
        assert vtk[0].read_text().startswith("# vtk DataFile")


class TestWeakResidual:
    """Tests for the weak residual and the test-function basket."""

    def test_basket(self):
        basket = function_basket(horizon=0.5)
        assert [phi.name for phi in basket] == ["const", "x", "cos-xy", "yz", "bump"]
        x = np.array([[0.3, 0.4, 0.5]])
        for phi in basket:
            assert phi(0.5, x)[0] == pytest.approx(0.0)
            assert phi.grad(0.0, x).shape == (1, 3)

    def test_constant_function_residual_vanishes(self, grid, grid1, solve):
        chart = TubeChart(make_translating_segment(), eps0=0.1)
        m = make_material(v_C=(0.3, 0.0, 0.0))
        traj = LimitSolver(chart, m, grid, grid1, solve).run()
        phi = function_basket(solve.t_end)[0]
        residual = weak_residual(chart, m, chart.eps0, traj.bulk, traj.curve, phi)
        assert abs(residual) < 1e-10

    def test_residual_is_finite_for_basket(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        m = make_material()
        traj = LimitSolver(chart, m, grid, grid1, solve).run()
        for phi in function_basket(solve.t_end):
            assert np.isfinite(weak_residual(chart, m, chart.eps0, traj.bulk, traj.curve, phi))

    def test_needs_two_time_levels(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        m = make_material()
        u, uc = LimitSolver(chart, m, grid, grid1, solve).initial_state()
        with pytest.raises(ValueError):
            weak_residual(chart, m, 0.1, [u], [uc], function_basket(0.03)[0])

    def test_mismatched_times(self, grid, grid1, solve):
        chart = TubeChart(make_segment(), eps0=0.1)
        m = make_material()
        traj = LimitSolver(chart, m, grid, grid1, solve).run()
        with pytest.raises(ValueError):
            weak_residual(chart, m, 0.1, traj.bulk[:2], traj.curve[1:3], function_basket(0.03)[0])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
