"""
Tests for the verification suites, the eps-ladders and report rendering.
"""

import json

import pytest
import numpy as np
import pandas as pd

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.run_config import load_run_config
from src.coefficients.materials import reference_function, scalar_constant, tube_constant, vector_constant
from src.coefficients.params import CapacityParams, DeltaRule, MaterialParams
from src.geometry.chart import TubeChart
from src.geometry.curves import build_curve, make_arc, make_segment
from src.harness.ladders import (
    Ladder,
    negative_control_params,
    run_capacity_ladder,
    run_energy_ladder,
    run_limit_comparison,
    run_residual_refinement,
    strictly_decreasing,
)
from src.harness.report import ConvergenceReport, Criterion, ReportWriter
from src.harness.scenario import thread_count
from src.harness.suites import (
    CheckResult,
    SuiteReport,
    conservation_check,
    run_coefficient_suite,
    run_distance_suite,
    run_geometry_suite,
)
from src.mesh.grids import Grid3D


@pytest.fixture
def segment_chart():
    return TubeChart(make_segment(), eps0=0.1)


class TestGeometrySuite:
    """Tests for run_geometry_suite."""

    def test_segment_passes(self, segment_chart):
        report = run_geometry_suite(segment_chart, n_samples=50)
        assert report.passed
        assert report.check("jacobian_positive").passed
        assert report.check("chart_inversion").worst_error < 1e-10

    def test_invalid_chart_reports_witness(self):
        chart = TubeChart(make_arc(radius=0.3), eps0=0.35, validate=False)
        report = run_geometry_suite(chart, n_samples=20)
        assert not report.passed
        check = report.check("jacobian_positive")
        assert len(check.witness) == 4
        assert len(report.checks) == 1

    def test_unknown_check(self, segment_chart):
        report = run_geometry_suite(segment_chart, n_samples=10)
        with pytest.raises(KeyError):
            report.check("curvature")

    @pytest.mark.parametrize("name", ["translating-segment", "rotating-arc", "helix-wiggle"])
    def test_moving_curves_pass(self, name):
        chart = TubeChart(build_curve(name), eps0=0.1)
        report = run_geometry_suite(chart, n_samples=60, n_times=4)
        failed = [c.name for c in report.checks if c.hard and not c.passed]
        assert report.passed, failed
        assert report.check("curve_velocity").worst_error < 1e-8
        assert report.check("metric_inverse").worst_error < 1e-10


class TestDistanceAndCoefficientSuites:
    """Tests for the distance and coefficient suites."""

    def test_distance_gradients_and_cutoff(self):
        report = run_distance_suite(CapacityParams(0.1, 0.05, 0.01), n_samples=200)
        for name in ("gradient_unit_norm", "gradient_closed_form", "cutoff_values"):
            assert report.check(name).passed, name

    def test_coefficient_bounds(self, segment_chart):
        m = MaterialParams(
            k0=1.0,
            k_s=tube_constant(2.0),
            k_n=tube_constant(1.0),
            theta=0.5,
            v=vector_constant((0.0, 0.0, 0.0)),
            v_C=vector_constant((1.0, 0.0, 0.0)),
            u0=scalar_constant(1.0),
        )
        report = run_coefficient_suite(segment_chart, CapacityParams(0.1, 0.05, 0.01), m, n_samples=400)
        assert report.passed
        assert set(report.to_frame()["check"]) == {"capacity_range", "capacity_on_core", "ellipticity", "advection_bound"}


class TestConservationCheck:
    """Tests for conservation_check."""

    def test_drift_within_tolerance(self):
        records = pd.DataFrame({"mass": [2.0, 2.0 + 1e-12, 2.0 - 1e-12]})
        result = conservation_check(records, tol=1e-10, min_steps=2)
        assert result.passed
        assert result.name == "mass_conservation"

    def test_drift_too_large(self):
        records = pd.DataFrame({"mass": [1.0, 1.01]})
        assert not conservation_check(records, tol=1e-8).passed

    def test_too_few_steps(self):
        records = pd.DataFrame({"mass": [1.0, 1.0]})
        result = conservation_check(records, min_steps=3)
        assert not result.passed
        assert "required" in result.detail


class TestLadder:
    """Tests for Ladder layout and run_capacity_ladder."""

    def test_eps_values_and_resolution(self):
        ladder = Ladder(eps0=0.1, n_rungs=3, base_resolution=16, max_resolution=48)
        assert ladder.indices == [1, 2, 3]
        assert ladder.eps_values() == pytest.approx([0.05, 0.025, 0.0125])
        assert [ladder.resolution(k) for k in range(3)] == [16, 32, 48]

    def test_params_follow_rule(self):
        ladder = Ladder(eps0=0.1, n_rungs=2, rule="eps11")
        assert ladder.rule is DeltaRule.EPS11
        assert ladder.params()[0].delta == pytest.approx(0.05 ** 11)

    def test_invalid_layout(self):
        with pytest.raises(ValueError):
            Ladder(eps0=0.1, n_rungs=0)
        with pytest.raises(ValueError):
            Ladder(eps0=0.1, first_rung=0)

    def test_strictly_decreasing(self):
        assert strictly_decreasing([3.0, 2.0, 1.0])
        assert not strictly_decreasing([3.0, 3.0, 1.0])
        assert strictly_decreasing([0.0, 0.0, 0.0])

    def test_negative_control_collar(self):
        p = negative_control_params(0.1, 0.025)
        assert p.delta == pytest.approx(0.025)
        p = negative_control_params(0.1, 0.06)
        assert p.delta == pytest.approx(0.99 * 0.04)

    def test_capacity_ladder_converges(self, segment_chart):
        ladder = Ladder(eps0=0.1, n_rungs=4)
        report = run_capacity_ladder(
            segment_chart, reference_function("const"), 0.0, ladder, Grid3D.cube(8), f_name="const"
        )
        assert report.title == "Capacity ladder: segment, f=const"
        assert report.passed
        errors = report.to_frame()["relative_error"].to_numpy()
        assert errors[-1] < 1e-3
        assert report.criterion("error_decreasing").passed


def small_config(curve: str):
    return load_run_config(overrides=[
        f"geometry.curve={curve}",
        "geometry.resolution=[8, 8, 8]",
        "solver.dt=0.005",
        "solver.t_end=0.01",
        "limit.n_s=16",
        "ladder.base_resolution=8",
        "ladder.max_resolution=8",
    ])


class TestSolverLadders:
    """Energy ladder, limit comparison and residual refinement on coarse grids."""

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_energy_ladder(self, curve):
        config = small_config(curve)
        report = run_energy_ladder(config, Ladder.from_config(config, rule=DeltaRule.EPS11))
        assert report.title == f"Energy ladder: {curve}"
        frame = report.to_frame()
        assert list(frame["eps"]) == pytest.approx([0.05, 0.025, 0.0125])
        assert list(frame["resolution"]) == [8, 8, 8]
        assert np.all(np.isfinite(frame["energy"]))
        for name in ("rungs_completed", "energy_uniform", "gradient_uniform"):
            assert report.criterion(name).passed, name
        assert report.passed

    def test_energy_ladder_negative_control_is_informational(self):
        config = small_config("segment")
        report = run_energy_ladder(config, Ladder.from_config(config, rule=DeltaRule.EPS11))
        control = report.criterion("negative_control")
        assert not control.hard
        assert np.isfinite(control.value)
        assert report.metadata["negative_control"]["delta"] == pytest.approx(0.99 * 0.05)
        assert report.passed == all(c.passed for c in report.criteria if c.hard)

    def test_energy_ladder_without_control(self):
        config = small_config("segment")
        report = run_energy_ladder(config, Ladder.from_config(config, rule=DeltaRule.EPS11), negative_control=False)
        with pytest.raises(KeyError):
            report.criterion("negative_control")
        assert "negative_control" not in report.metadata

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_limit_comparison(self, curve):
        config = small_config(curve)
        report = run_limit_comparison(config, Ladder.from_config(config, rule=DeltaRule.EPS3))
        assert report.title == f"Limit comparison: {curve}"
        frame = report.to_frame()
        assert len(frame) == 3
        assert np.isnan(frame["cauchy"].iloc[0])
        assert np.all(np.isfinite(frame["cauchy"].iloc[1:]))
        for column in ("limit_distance", "bulk_distance", "xi_distance", "residual_const"):
            assert np.all(np.isfinite(frame[column])), column
        hard = {c.name for c in report.criteria if c.hard}
        assert hard == {"cauchy_decreasing", "limit_distance_decreasing", "xi_distance_decreasing"}
        residual = report.criterion("weak_residual")
        assert residual.passed and residual.value <= residual.threshold
        assert report.metadata["n_s"] == 16

    @pytest.mark.parametrize("curve", ["segment", "translating-segment"])
    def test_residual_refinement(self, curve):
        config = small_config(curve)
        report = run_residual_refinement(config, resolutions=[8, 12])
        frame = report.to_frame()
        assert sorted(set(frame["resolution"])) == [8, 12]
        assert len(frame) == 2 * len({c.name for c in report.criteria})
        assert all(c.name.startswith("residual_") for c in report.criteria)
        assert np.all(np.isfinite(frame["residual"]))
        assert report.metadata["resolutions"] == [8, 12]


class TestReports:
    """Tests for ConvergenceReport and ReportWriter."""

    @pytest.fixture
    def ladder_report(self):
        rungs = [
            {"eps": 0.05, "relative_error": 1e-2},
            {"eps": 0.025, "relative_error": 2.5e-3},
            {"eps": 0.0125, "relative_error": 6.25e-4},
        ]
        return ConvergenceReport(
            title="Synthetic ladder",
            rungs=rungs,
            criteria=[
                Criterion("final_relative_error", True, 6.25e-4, 1e-3),
                Criterion("soft_note", False, 1.0, 0.0, hard=False),
            ],
        )

    def test_needs_three_rungs(self):
        with pytest.raises(ValueError):
            ConvergenceReport(title="short", rungs=[{"eps": 0.1}, {"eps": 0.05}])

    def test_soft_criteria_do_not_fail(self, ladder_report):
        assert ladder_report.passed
        with pytest.raises(KeyError):
            ladder_report.criterion("missing")

    def test_write_ladder_outputs(self, ladder_report, tmp_path):
        writer = ReportWriter(ladder_report)
        paths = writer.write_outputs(tmp_path, stem="ladder")
        assert set(paths) == {"txt", "json", "csv", "png"}
        assert all(p.exists() for p in paths.values())
        assert "[WARN] soft_note" in paths["txt"].read_text()
        data = json.loads(paths["json"].read_text())
        assert data["passed"] is True
        assert len(pd.read_csv(paths["csv"])) == 3

    def test_write_suite_outputs(self, tmp_path):
        report = SuiteReport(title="Synthetic suite", checks=[
            CheckResult("identity", True, 1e-14, 1e-10),
            CheckResult("bound", False, 2.0, 1.0, witness=[0.0, 0.5, 0.01, 0.0]),
        ])
        paths = ReportWriter(report).write_outputs(tmp_path, plots=True)
        assert "png" not in paths
        text = paths["txt"].read_text()
        assert "[FAIL] bound" in text
        assert "witness=[0.0, 0.5, 0.01, 0.0]" in text


class TestThreadCount:
    """Tests for thread_count."""

    def test_unset(self, monkeypatch):
        monkeypatch.delenv("CCFLOW_THREADS", raising=False)
        assert thread_count() == 1

    def test_blank(self, monkeypatch):
        monkeypatch.setenv("CCFLOW_THREADS", "  ")
        assert thread_count(default=3) == 3

    def test_invalid(self, monkeypatch):
        monkeypatch.setenv("CCFLOW_THREADS", "many")
        assert thread_count() == 1

    def test_value_clamped(self, monkeypatch):
        monkeypatch.setenv("CCFLOW_THREADS", "4")
        assert thread_count() == 4
        monkeypatch.setenv("CCFLOW_THREADS", "-2")
        assert thread_count() == 1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
