"""
Tests for capacity parameters, material fields and the concentrated coefficients.
"""

import pytest
import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))

from config.settings import MATERIAL_CONFIG
from src.coefficients.fields import (
    advection_bound,
    advection_v,
    capacity_a,
    cutoff_chi,
    diffusivity_K,
    dist_core,
    dist_core_grad,
    dist_core_reference,
    dt_capacity_coords,
    zeta_coords,
)
from src.coefficients.materials import (
    FieldSpec,
    build_vector_field,
    reference_function,
    scalar_constant,
    tube_constant,
    vector_constant,
)
from src.coefficients.params import CapacityParams, DeltaRule, MaterialParams
from src.geometry.chart import TubeChart
from src.geometry.curves import make_segment, make_translating_segment


@pytest.fixture
def params():
    return CapacityParams(eps0=0.1, eps=0.05, delta=0.01)


@pytest.fixture
def material():
    return MaterialParams(
        k0=1.0,
        k_s=tube_constant(2.0),
        k_n=tube_constant(1.0),
        theta=0.5,
        v=vector_constant((0.0, 0.0, 0.0)),
        v_C=vector_constant((1.0, 0.0, 0.0)),
        u0=scalar_constant(1.0),
    )


class TestCapacityParams:
    """Tests for CapacityParams and delta rules."""

    def test_contrast(self, params):
        assert params.contrast == pytest.approx(4.0)

    def test_eps_must_be_below_eps0(self):
        with pytest.raises(ValueError):
            CapacityParams(eps0=0.1, eps=0.1, delta=0.001)

    def test_delta_must_fit_in_chart(self):
        with pytest.raises(ValueError):
            CapacityParams(eps0=0.1, eps=0.05, delta=0.05)

    def test_delta_rules(self):
        assert DeltaRule.EPS3.delta(0.1) == pytest.approx(1e-3)
        assert DeltaRule.EPS11.delta(0.5, constant=2.0) == pytest.approx(2.0 * 0.5 ** 11)
        assert DeltaRule.EXPLICIT.delta(0.1, explicit=0.02) == 0.02
        with pytest.raises(ValueError):
            DeltaRule.EXPLICIT.delta(0.1)

    def test_from_rule(self):
        p = CapacityParams.from_rule(0.1, 0.05, DeltaRule.EPS3)
        assert p.delta == pytest.approx(0.05 ** 3)
        assert p.to_dict() == {"eps0": 0.1, "eps": 0.05, "delta": p.delta}


class TestMaterialParams:
    """Tests for MaterialParams."""

    def test_from_default_config(self):
        m = MaterialParams.from_config(MATERIAL_CONFIG)
        assert m.k0 == 1.0
        assert m.specs["u0"]["kind"] == "bump"
        assert m.validate(0.1, ((0, 1), (0, 1), (0, 1)), n_samples=200)

    def test_theta_above_k0(self):
        with pytest.raises(ValueError, match="theta"):
            MaterialParams(
                k0=1.0, k_s=tube_constant(2.0), k_n=tube_constant(1.0), theta=2.0,
                v=vector_constant(), v_C=vector_constant(), u0=scalar_constant(),
            )

    def test_theta_above_curve_diffusivity(self):
        m = MaterialParams(
            k0=1.0, k_s=tube_constant(2.0), k_n=tube_constant(0.8), theta=0.9,
            v=vector_constant(), v_C=vector_constant(), u0=scalar_constant(),
        )
        with pytest.raises(ValueError, match="theta"):
            m.validate(0.1, ((0, 1), (0, 1), (0, 1)), n_samples=100)

    def test_unknown_field_kind(self):
        with pytest.raises(ValueError, match="Unknown vector field"):
            build_vector_field(FieldSpec("tornado"))

    def test_reference_functions(self):
        x = np.array([[0.25, 0.5, 0.5]])
        assert reference_function("const")(x)[0] == 1.0
        assert reference_function("linear")(x)[0] == pytest.approx(0.25)
        assert reference_function("bump")(np.array([[0.5, 0.5, 0.5]]))[0] == pytest.approx(1.0)
        with pytest.raises(ValueError):
            reference_function("step")


class TestDistance:
    """Tests for the core distance and the cutoff."""

    def test_zero_on_core(self, params):
        assert dist_core(params, 0.5, 0.03, 0.04) == 0.0
        assert dist_core(params, 0.0, 0.0, 0.0) == 0.0

    def test_closed_form_values(self, params):
        assert dist_core(params, -0.1, 0.0, 0.0) == pytest.approx(0.1)
        assert dist_core(params, 0.5, 0.08, 0.0) == pytest.approx(0.03)
        assert dist_core(params, 1.2, 0.08, 0.0) == pytest.approx(np.sqrt(0.04 + 0.0009))

    def test_matches_brute_force(self, params):
        points = np.array([
            [-0.05, 0.02, 0.0],
            [0.5, 0.07, 0.01],
            [1.04, -0.06, 0.03],
        ])
        expected = dist_core(params, points[:, 0], points[:, 1], points[:, 2])
        np.testing.assert_allclose(dist_core_reference(params, points), expected, atol=1e-6)

    def test_gradient_unit_norm(self, params):
        s = np.array([-0.05, 0.5, 1.05])
        nu = np.array([0.0, 0.08, 0.07])
        om = np.array([0.01, 0.0, 0.0])
        g = dist_core_grad(params, s, nu, om)
        np.testing.assert_allclose(np.linalg.norm(g, axis=-1), 1.0, atol=1e-12)

    def test_gradient_zero_on_core(self, params):
        np.testing.assert_array_equal(dist_core_grad(params, 0.5, 0.01, 0.0), np.zeros(3))

    def test_cutoff(self):
        np.testing.assert_allclose(cutoff_chi(0.01, [0.0, 0.005, 0.01, 0.02]), [1.0, 0.5, 0.0, 0.0])
        with pytest.raises(ValueError):
            cutoff_chi(0.0, 0.1)

    def test_zeta_range(self, params):
        z = zeta_coords(params, np.full(5, 0.5), np.linspace(0, 0.1, 5), np.zeros(5))
        assert z.min() >= 0.0 and z.max() <= 1.0


class TestConcentratedCoefficients:
    """Tests for a, K and v on the ambient grid."""

    @pytest.fixture
    def chart(self):
        return TubeChart(make_segment(), eps0=0.1)

    def test_capacity_core_collar_and_far(self, chart, params):
        x = np.array([
            [0.5, 0.5, 0.5],
            [0.5, 0.555, 0.5],
            [0.5, 0.9, 0.5],
        ])
        np.testing.assert_allclose(capacity_a(chart, params, 0.0, x), [4.0, 2.5, 1.0], atol=1e-9)

    def test_diffusivity_tensor(self, chart, params, material):
        x = np.array([[0.5, 0.5, 0.5], [0.5, 0.9, 0.5]])
        K = diffusivity_K(chart, params, material, 0.0, x)
        np.testing.assert_allclose(K[0], np.diag([8.0, 4.0, 4.0]), atol=1e-9)
        np.testing.assert_allclose(K[1], np.eye(3))

    def test_ellipticity(self, chart, params, material):
        rng = np.random.default_rng(42)
        x = np.column_stack([rng.uniform(0.1, 0.9, 200), rng.uniform(0.4, 0.6, 200), rng.uniform(0.4, 0.6, 200)])
        K = diffusivity_K(chart, params, material, 0.0, x)
        a = capacity_a(chart, params, 0.0, x)
        lam = np.linalg.eigvalsh(K)[:, 0]
        assert np.all(lam >= material.theta * a - 1e-10)

    def test_advection(self, chart, params, material):
        x = np.array([[0.5, 0.5, 0.5], [0.5, 0.9, 0.5]])
        v = advection_v(chart, params, material, 0.0, x)
        np.testing.assert_allclose(v, [[4.0, 0.0, 0.0], [0.0, 0.0, 0.0]], atol=1e-9)
        assert advection_bound(material, 0.0, x) == pytest.approx(1.0)

    def test_capacity_rate_static_curve(self, chart, params):
        assert dt_capacity_coords(chart, params, 0.0, 0.5, 0.055, 0.0) == 0.0

    def test_capacity_rate_moving_curve(self, params):
        chart = TubeChart(make_translating_segment(speed=0.2), eps0=0.1)
        rate = dt_capacity_coords(chart, params, 0.5, 0.5, 0.055, 0.0)
        # The curve advances towards the point, so the collar value grows
        assert float(rate) == pytest.approx(3.0 * 0.2 / 0.01, rel=1e-6)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
