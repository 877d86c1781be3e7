"""Geometry, kinematics, in-cylinder state and mixture accounting."""

import json
import math

import numpy as np
import pytest

from phasekit.engine import (
    DEFAULT_GEOMETRY,
    EngineGeometry,
    IvcState,
    ManifoldMap,
    MixtureState,
    cylinder_volume,
    dilution_fraction,
    equivalence_ratio,
    ivc_state,
    load_geometry,
    polytropic_state,
    residual_fraction,
    save_geometry,
)

GEOM = DEFAULT_GEOMETRY


class TestGeometry:
    def test_derived_volumes(self):
        assert GEOM.displaced_volume == pytest.approx(
            math.pi / 4.0 * 0.126**2 * 0.166, rel=1e-14)
        assert GEOM.clearance_volume == pytest.approx(
            GEOM.displaced_volume / 16.0, rel=1e-14)
        # 2.07 L per cylinder on the stock 12.4 L six
        assert GEOM.displaced_volume == pytest.approx(12.4e-3 / 6, rel=2e-3)

    def test_tdc_is_clearance_volume(self):
        assert cylinder_volume(0.0, GEOM) == pytest.approx(
            GEOM.clearance_volume, rel=1e-12)

    def test_bdc_is_compression_ratio_times_clearance(self):
        assert cylinder_volume(180.0, GEOM) == pytest.approx(
            GEOM.compression_ratio * cylinder_volume(0.0, GEOM), rel=1e-12)

    def test_volume_at_ivc_frozen_value(self):
        # independent hand evaluation of the slider-crank relation
        assert cylinder_volume(-148.5, GEOM) == pytest.approx(
            0.0020937787711047913, rel=1e-12)

    def test_periodicity_and_extremes(self):
        theta = np.linspace(-179.5, 180.0, 720)
        v = cylinder_volume(theta, GEOM)
        assert np.allclose(v, cylinder_volume(theta + 720.0, GEOM), rtol=1e-12)
        assert np.all(v >= cylinder_volume(0.0, GEOM) - 1e-18)
        assert theta[np.argmin(v)] == 0.0
        assert v.max() == pytest.approx(cylinder_volume(180.0, GEOM), rel=1e-12)

    def test_vectorized_matches_scalar(self):
        theta = np.array([-148.5, -60.0, 0.0, 37.5, 137.0])
        v = cylinder_volume(theta, GEOM)
        for th, vi in zip(theta, v):
            assert cylinder_volume(float(th), GEOM) == vi

    @pytest.mark.parametrize("kwargs", [
        dict(bore=-0.1), dict(stroke=0.0), dict(rod_length=0.05),
        dict(compression_ratio=1.0), dict(compression_ratio=0.9),
    ])
    def test_invalid_geometry_rejected(self, kwargs):
        base = dict(bore=0.126, stroke=0.166, rod_length=0.251, compression_ratio=17.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            EngineGeometry(**base)

    def test_rod_must_exceed_crank_radius(self):
        with pytest.raises(ValueError, match="rod_length"):
            EngineGeometry(bore=0.126, stroke=0.166, rod_length=0.08,
                           compression_ratio=17.0)

    def test_json_round_trip(self, tmp_path):
        path = tmp_path / "geom.json"
        save_geometry(GEOM, path)
        assert load_geometry(path) == GEOM

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "geom.json"
        path.write_text(json.dumps({"bore": 0.126, "stroke": 0.166,
                                    "rod_length": 0.251, "compression_ratio": 17,
                                    "boar": 0.2}))
        with pytest.raises(ValueError, match="unknown"):
            load_geometry(path)

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "geom.json"
        path.write_text(json.dumps({"bore": 0.126}))
        with pytest.raises(ValueError, match="missing"):
            load_geometry(path)


class TestPolytropicState:
    def test_identity_at_ivc(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            p, t = 1.0 + 4.0 * rng.random(), 250.0 + 200.0 * rng.random()
            state = ivc_state(p, t, GEOM)
            p_out, t_out = polytropic_state(GEOM.ivc_angle, state, 1.176, GEOM)
            assert p_out == pytest.approx(p, rel=1e-12)
            assert t_out == pytest.approx(t, rel=1e-12)

    def test_volume_ratio_two(self):
        # construct an IVC state exactly twice the volume at the probe angle
        theta = 60.0
        state = IvcState(p_ivc=3.0, t_ivc=400.0,
                         v_ivc=2.0 * cylinder_volume(theta, GEOM))
        p, t = polytropic_state(theta, state, 1.176, GEOM)
        assert t == pytest.approx(400.0 * 2.0**0.176, rel=1e-12)
        assert p == pytest.approx(3.0 * 2.0**1.176, rel=1e-12)

    def test_pv_k_invariant_along_span(self):
        state = ivc_state(2.0, 300.0, GEOM)
        k = 1.176
        reference = state.p_ivc * state.v_ivc**k
        for theta in np.linspace(GEOM.ivc_angle, GEOM.evo_angle, 200):
            p, _ = polytropic_state(float(theta), state, k, GEOM)
            assert p * cylinder_volume(float(theta), GEOM) ** k == pytest.approx(
                reference, rel=1e-9)

    def test_isothermal_degenerate_case(self):
        state = ivc_state(2.0, 300.0, GEOM)
        for theta in (-100.0, -30.0, 0.0, 45.0):
            _, t = polytropic_state(theta, state, 1.0 + 1e-15, GEOM)
            assert t == pytest.approx(300.0, rel=1e-12)

    @pytest.mark.parametrize("theta", [-149.0, 137.5, -360.0, 200.0])
    def test_out_of_span_rejected(self, theta):
        state = ivc_state(2.0, 300.0, GEOM)
        with pytest.raises(ValueError, match="span"):
            polytropic_state(theta, state, 1.176, GEOM)

    def test_invalid_state_rejected(self):
        with pytest.raises(ValueError):
            IvcState(p_ivc=0.0, t_ivc=300.0, v_ivc=1e-3)
        with pytest.raises(ValueError):
            IvcState(p_ivc=2.0, t_ivc=-5.0, v_ivc=1e-3)


class TestMixture:
    def test_stoichiometric_gives_unity(self):
        mix = MixtureState(m_fuel=1e-4, m_air=1e-4 * 14.47)
        assert equivalence_ratio(mix) == pytest.approx(1.0, rel=1e-12)

    def test_lean_case_from_air_fuel_ratio(self):
        # AFR 48.7 at stoichiometric 14.47 sits right at the lean edge
        mix = MixtureState(m_fuel=1.0e-4, m_air=48.7e-4)
        assert equivalence_ratio(mix) == pytest.approx(0.2971, abs=5e-5)

    def test_zero_fuel(self):
        assert equivalence_ratio(MixtureState(m_fuel=0.0, m_air=1e-3)) == 0.0

    def test_zero_air_rejected(self):
        with pytest.raises(ValueError, match="air"):
            equivalence_ratio(MixtureState(m_fuel=1e-4, m_air=0.0))

    def test_scale_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m_fuel, m_air = rng.random() * 1e-3, rng.random() * 1e-2 + 1e-4
            scale = 10.0 ** rng.uniform(-3, 3)
            phi_a = equivalence_ratio(MixtureState(m_fuel=m_fuel, m_air=m_air))
            phi_b = equivalence_ratio(
                MixtureState(m_fuel=m_fuel * scale, m_air=m_air * scale))
            assert phi_b == pytest.approx(phi_a, rel=1e-12)

    def test_residual_fraction(self):
        mix = MixtureState(m_fuel=1e-4, m_air=3e-3, m_egr=9e-4, m_r=2e-4)
        assert residual_fraction(mix) == pytest.approx(2e-4 / (3e-3 + 1e-4 + 9e-4))
        assert residual_fraction(
            MixtureState(m_fuel=1e-4, m_air=3e-3, m_r=0.0)) == 0.0

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            MixtureState(m_fuel=-1e-4, m_air=1e-3)


class TestDilution:
    def test_simple_sums(self):
        assert dilution_fraction(0.0, 0.0) == 0.0
        assert dilution_fraction(0.25, 0.0384) == pytest.approx(0.2884, rel=1e-12)

    def test_nonphysical_rejected(self):
        with pytest.raises(ValueError, match="nonphysical"):
            dilution_fraction(0.6, 0.5)
        with pytest.raises(ValueError):
            dilution_fraction(-0.1, 0.0)
        with pytest.raises(ValueError):
            dilution_fraction(0.2, 1.0)


class TestManifoldMap:
    def test_identity_default(self):
        assert ManifoldMap().apply(2.0, 300.0) == (2.0, 300.0)

    def test_affine(self):
        mapped = ManifoldMap(p_gain=0.98, p_offset=0.05, t_gain=1.1, t_offset=40.0)
        p, t = mapped.apply(2.0, 300.0)
        assert p == pytest.approx(0.98 * 2.0 + 0.05)
        assert t == pytest.approx(1.1 * 300.0 + 40.0)
