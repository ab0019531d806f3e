"""
Tests for curves, frames and the tube chart.
"""

import pytest
import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.exceptions import ChartValidityError, DomainError
from src.geometry.chart import TubeChart
from src.geometry.curves import (
    build_curve,
    load_polyline,
    make_arc,
    make_helix_wiggle,
    make_rotating_arc,
    make_segment,
    make_translating_segment,
)
from src.geometry.frames import double_reflection


class TestCurves:
    """Tests for the curve catalogue."""

    def test_segment_is_static(self):
        curve = make_segment()
        assert curve.static
        assert curve.name == "segment"
        np.testing.assert_allclose(curve(0.0, 0.5), [0.5, 0.5, 0.5])

    def test_translating_segment_moves(self):
        curve = make_translating_segment(speed=0.2)
        assert not curve.static
        np.testing.assert_allclose(curve(1.0, 0.0) - curve(0.0, 0.0), [0.0, 0.2, 0.0])

    def test_arc_names(self):
        assert make_arc().name == "arc"
        assert make_rotating_arc().name == "rotating-arc"

    def test_build_curve_unknown_name(self):
        with pytest.raises(ValueError, match="Unknown curve"):
            build_curve("trefoil")

    def test_build_curve_bad_parameter(self):
        with pytest.raises(ValueError):
            build_curve("arc", {"colour": "red"})

    def test_polyline_needs_file(self):
        with pytest.raises(ValueError):
            build_curve("polyline")

    def test_segment_leaving_domain(self):
        curve = make_segment(origin=(0.5, 0.5, 0.5))
        with pytest.raises(DomainError):
            curve.validate(0.1)

    def test_load_polyline(self, tmp_path):
        s = np.linspace(-0.2, 1.2, 15)
        path = tmp_path / "line.txt"
        rows = [f"0 {si:.6f} {0.1 + 0.8 * si:.6f} 0.5 0.5" for si in s]
        path.write_text("# t s x y z\n" + "\n".join(rows) + "\n")

        curve = load_polyline(path)
        assert curve.static
        np.testing.assert_allclose(curve(0.0, 0.5), [0.5, 0.5, 0.5], atol=1e-10)

    def test_load_polyline_ragged(self, tmp_path):
        path = tmp_path / "ragged.txt"
        path.write_text("0 0 0 0 0\n0 1 1 0 0\n1 0 0 0 0\n")
        with pytest.raises(ValueError):
            load_polyline(path)


class TestFrames:
    """Tests for frame propagation."""

    def test_double_reflection_on_straight_line(self):
        t0 = np.array([1.0, 0.0, 0.0])
        r0 = np.array([0.0, 1.0, 0.0])
        r1 = double_reflection(np.zeros(3), t0, r0, np.array([0.1, 0.0, 0.0]), t0)
        np.testing.assert_allclose(r1, r0, atol=1e-14)

    def test_helix_frame_orthonormal(self):
        chart = TubeChart(make_helix_wiggle(), eps0=0.05)
        for s in (0.0, 0.37, 1.0):
            frame = chart.eval_frame(0.3, s)
            assert frame.orthonormality_error() < 1e-10
            assert frame.orientation() == pytest.approx(1.0, abs=1e-10)

    def test_helix_frame_tangent_matches_curve(self):
        chart = TubeChart(make_helix_wiggle(), eps0=0.05)
        t_vec, _, _ = chart.frame_arrays(0.0, np.array([0.25, 0.75]))
        tangent = chart.tangent(0.0, np.array([0.25, 0.75]))
        expected = tangent / np.linalg.norm(tangent, axis=-1, keepdims=True)
        np.testing.assert_allclose(t_vec, expected, atol=1e-10)


class TestTubeChart:
    """Tests for TubeChart."""

    @pytest.fixture
    def arc_chart(self):
        return TubeChart(make_arc(), eps0=0.1)

    @pytest.fixture
    def segment_chart(self):
        return TubeChart(make_segment(), eps0=0.1)

    @pytest.fixture
    def rotating_chart(self):
        return TubeChart(make_rotating_arc(angular_speed=0.5), eps0=0.1)

    def test_eps0_must_be_positive(self):
        with pytest.raises(ValueError):
            TubeChart(make_segment(), eps0=0.0)

    def test_arc_jacobian(self, arc_chart):
        J = arc_chart.det_J_F(0.0, 0.5, 0.05, 0.0)
        assert float(J) == pytest.approx(0.25, abs=1e-8)

        J = arc_chart.det_J_F(0.0, 0.5, -0.08, 0.03)
        assert float(J) == pytest.approx(0.38, abs=1e-8)

    def test_segment_metric_is_identity(self, segment_chart):
        G = segment_chart.metric(0.0, np.array([0.2, 0.8]), np.array([0.05, 0.0]), np.array([0.0, -0.05]))
        np.testing.assert_allclose(G, np.broadcast_to(np.eye(3), G.shape), atol=1e-9)
        np.testing.assert_allclose(segment_chart.det_J_F(0.0, 0.5, 0.0, 0.0), 1.0)

    def test_metric_inverse(self, arc_chart):
        s = np.array([0.1, 0.5, 0.9])
        nu = np.array([0.05, -0.02, 0.0])
        om = np.array([0.0, 0.06, -0.09])
        G = arc_chart.metric(0.0, s, nu, om)
        G_inv = arc_chart.metric_inv(0.0, s, nu, om)
        np.testing.assert_allclose(G @ G_inv, np.broadcast_to(np.eye(3), G.shape), atol=1e-8)

    def test_inverse_gradient(self, arc_chart):
        grad = arc_chart.grad_F(0.0, 0.4, 0.03, 0.02)
        inv = arc_chart.inv_grad_F(0.0, 0.4, 0.03, 0.02)
        np.testing.assert_allclose(inv @ grad, np.eye(3), atol=1e-8)

    def test_invalid_radius_reports_witness(self):
        with pytest.raises(ChartValidityError) as excinfo:
            TubeChart(make_arc(radius=0.3), eps0=0.35)
        assert excinfo.value.witness is not None
        assert len(excinfo.value.witness) == 4

    def test_out_of_range_coordinates(self, segment_chart):
        with pytest.raises(DomainError):
            segment_chart.point(0.0, 1.5, 0.0, 0.0)
        with pytest.raises(DomainError):
            segment_chart.point(0.0, 0.5, 0.2, 0.0)
        with pytest.raises(DomainError):
            segment_chart.point(2.0, 0.5, 0.0, 0.0)

    def test_static_velocity_is_zero(self, segment_chart):
        vel, meta = segment_chart.curve_velocity(0.5, 0.5, 0.02, 0.0, with_metadata=True)
        np.testing.assert_array_equal(vel, np.zeros(3))
        assert meta["stencil"] == "static"

    def test_rotating_arc_velocity(self, rotating_chart):
        t, s, nu = 0.4, 0.3, 0.05
        vel = rotating_chart.curve_velocity(t, s, nu, 0.0)
        th = s + 0.5 * t
        expected = (0.3 - nu) * 0.5 * np.array([-np.sin(th), np.cos(th), 0.0])
        np.testing.assert_allclose(vel, expected, atol=1e-8)

    def test_velocity_stencil_near_endpoints(self, rotating_chart):
        _, meta = rotating_chart.curve_velocity(0.0, 0.3, with_metadata=True)
        assert meta["stencil"] == "forward"
        _, meta = rotating_chart.curve_velocity(rotating_chart.t_final, 0.3, with_metadata=True)
        assert meta["stencil"] == "backward"

    def test_space_time_block_inverse(self, rotating_chart):
        D = rotating_chart.D_F(0.5, 0.6, 0.02, -0.04)
        D_inv = rotating_chart.D_F_inv(0.5, 0.6, 0.02, -0.04)
        np.testing.assert_allclose(D_inv @ D, np.eye(4), atol=1e-8)

    def test_invert_chart_round_trip(self, arc_chart):
        rng = np.random.default_rng(42)
        s = rng.uniform(0.1, 0.9, 50)
        rho = 0.09 * np.sqrt(rng.uniform(0, 1, 50))
        th = rng.uniform(0, 2 * np.pi, 50)
        nu, om = rho * np.cos(th), rho * np.sin(th)

        x = arc_chart.point(0.0, s, nu, om)
        coords, inside = arc_chart.invert_chart(0.0, x)
        assert inside.all()
        np.testing.assert_allclose(coords, np.column_stack([s, nu, om]), atol=1e-8)

    def test_invert_chart_outside(self, segment_chart):
        coords, inside = segment_chart.invert_chart(0.0, np.array([[0.5, 0.9, 0.5]]))
        assert not inside[0]
        assert np.isnan(coords[0]).all()

    def test_check_validity_min_jacobian(self, arc_chart):
        j_min = arc_chart.check_validity()
        assert j_min == pytest.approx(0.2, abs=1e-6)

    def test_coercivity_positive(self, segment_chart):
        assert segment_chart.coercivity_beta() == pytest.approx(1.0, abs=1e-8)

    def test_divergence_of_linear_field(self, arc_chart):
        div = arc_chart.divergence_in_tube(lambda x: x, 0.0, 0.5, 0.02, 0.01)
        assert float(div) == pytest.approx(3.0, abs=1e-4)


class TestMovingCharts:
    """Tests for validated charts on moving curves."""

    MOVING = ["translating-segment", "rotating-arc", "helix-wiggle"]

    @pytest.fixture
    def helix_chart(self):
        return TubeChart(make_helix_wiggle(), eps0=0.1)

    @pytest.mark.parametrize("name", MOVING)
    def test_curve_validates(self, name):
        curve = build_curve(name)
        assert not curve.static
        assert curve.validate(0.1)

    @pytest.mark.parametrize("name", MOVING)
    def test_validated_chart_builds(self, name):
        chart = TubeChart(build_curve(name), eps0=0.1)
        assert chart.check_validity() > 0.0

    def test_helix_metric_inverse_matches_gradient(self, helix_chart):
        s = np.array([0.05, 0.37, 0.81, 1.02])
        nu = np.array([0.07, -0.03, 0.0, 0.05])
        om = np.array([-0.06, 0.09, -0.1, 0.02])
        G = helix_chart.grad_F(0.3, s, nu, om)
        expected = np.linalg.inv(np.swapaxes(G, -1, -2) @ G)
        np.testing.assert_allclose(helix_chart.metric_inv(0.3, s, nu, om), expected, atol=1e-11)
        np.testing.assert_allclose(helix_chart.inv_grad_F(0.3, s, nu, om), np.linalg.inv(G), atol=1e-11)
        np.testing.assert_allclose(helix_chart.det_J_F(0.3, s, nu, om), np.linalg.det(G), atol=1e-11)

    def test_helix_gradient_matches_differences(self, helix_chart):
        s, nu, om, h = 0.42, 0.06, -0.07, 1e-3
        grad = helix_chart.grad_F(0.6, s, nu, om)
        column = (4 * (helix_chart.point(0.6, s + h / 2, nu, om) - helix_chart.point(0.6, s - h / 2, nu, om)) / h
                  - (helix_chart.point(0.6, s + h, nu, om) - helix_chart.point(0.6, s - h, nu, om)) / (2 * h)) / 3
        np.testing.assert_allclose(grad[:, 0], column, atol=1e-9)

    @pytest.mark.parametrize("t", [0.0, 0.4, 1.0])
    def test_helix_velocity_on_curve(self, helix_chart, t):
        s = np.array([0.1, 0.5, 0.9])
        vel = helix_chart.curve_velocity(t, s)
        np.testing.assert_allclose(vel, helix_chart.curve.gamma_t(t, s), atol=1e-9)

    def test_helix_velocity_stencils(self, helix_chart):
        _, meta = helix_chart.curve_velocity(0.001, 0.5, with_metadata=True)
        assert meta["stencil"] == "forward"
        _, meta = helix_chart.curve_velocity(0.5, 0.5, with_metadata=True)
        assert meta["stencil"] == "centered"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
