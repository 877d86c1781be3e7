"""Phasing-model mathematics: delay kernel, ignition integral, burn curve."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from phasekit.engine import DEFAULT_GEOMETRY, IvcState, cylinder_volume, ivc_state, polytropic_state
from phasekit.model import (
    DEFAULT_PARAMS,
    DEFAULT_WIEBE,
    MisfireError,
    ModelParams,
    OperatingCondition,
    WiebeParams,
    arrhenius_tau,
    burn_duration,
    ca50_from_wiebe,
    ca50_offset,
    ca50_predict,
    load_params,
    perturbed_params,
    predict_phasing,
    save_params,
    soc_full_integral,
    soc_simplified,
    wiebe_mfb,
)

GEOM = DEFAULT_GEOMETRY


def soc_oracle(cond, params=DEFAULT_PARAMS, geom=GEOM, step=0.001):
    """Independent brute-force trapezoid quadrature of the ignition
    integral, kept deliberately separate from the library implementation."""
    acc = 0.0
    th = cond.soi

    def rate(theta):
        ratio = cond.ivc.v_ivc / cylinder_volume(theta, geom)
        p = cond.ivc.p_ivc * ratio**params.kc
        t = cond.ivc.t_ivc * ratio ** (params.kc - 1.0)
        return (cond.phi**params.c3 * math.exp(-params.c4 * p**params.c5 / t)
                / ((params.c1 * cond.egr + params.c2) * cond.n))

    f_prev = rate(th)
    while th < geom.evo_angle:
        th_next = min(th + step, geom.evo_angle)
        f_next = rate(th_next)
        inc = 0.5 * (f_prev + f_next) * (th_next - th)
        if acc + inc >= 1.0:
            return th + (1.0 - acc) / inc * (th_next - th)
        acc += inc
        th, f_prev = th_next, f_next
    raise RuntimeError("oracle misfire")


class TestModelParams:
    def test_stock_constants(self):
        p = DEFAULT_PARAMS
        assert (p.c1, p.c2, p.c3) == (2.000e-6, 2.705e-6, -0.128)
        assert (p.c4, p.c5) == (10643.118, -0.312)
        assert (p.c7, p.c8, p.c9, p.kc) == (0.371, 0.0165, 4.784, 1.176)

    def test_file_round_trip_exact(self, tmp_path):
        path = tmp_path / "params.txt"
        original = ModelParams(c1=1.9998765432101234e-6, c4=10644.000000001)
        save_params(original, path)
        assert load_params(path) == original  # every decimal preserved

    def test_load_errors(self, tmp_path):
        path = tmp_path / "p.txt"
        path.write_text("c1=1e-6\nbogus=3\n")
        with pytest.raises(ValueError, match="p.txt:2"):
            load_params(path)
        path.write_text("c1=notafloat\n")
        with pytest.raises(ValueError, match="bad float"):
            load_params(path)
        path.write_text("c1=1e-6\n")
        with pytest.raises(ValueError, match="missing"):
            load_params(path)

    @pytest.mark.parametrize("kwargs", [
        dict(c2=0.0), dict(c2=-1e-6), dict(c9=0.0), dict(kc=1.0), dict(kc=1.4),
        dict(c1=-3e-6),  # would make c1*EGR + c2 vanish inside EGR in [0,1)
    ])
    def test_invariants_enforced(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)

    def test_perturbed_params(self):
        p = perturbed_params(DEFAULT_PARAMS, c4=0.01, c9=0.04)
        assert p.c4 == pytest.approx(DEFAULT_PARAMS.c4 * 1.01, rel=1e-15)
        assert p.c9 == pytest.approx(DEFAULT_PARAMS.c9 * 1.04, rel=1e-15)
        assert p.c2 == DEFAULT_PARAMS.c2
        with pytest.raises(ValueError, match="unknown"):
            perturbed_params(DEFAULT_PARAMS, c6=0.1)


class TestArrheniusTau:
    def test_frozen_value(self):
        assert arrhenius_tau(0.7, 56.0, 494.0, 0.25) == pytest.approx(
            706.372877130791, rel=1e-12)

    def test_zero_egr_reduction(self):
        p = DEFAULT_PARAMS
        expected = 0.7**p.c3 * math.exp(-p.c4 * 56.0**p.c5 / 494.0) / p.c2
        assert arrhenius_tau(0.7, 56.0, 494.0, 0.0) == pytest.approx(expected, rel=1e-12)

    def test_reciprocal_in_egr_term(self):
        doubled = ModelParams(c1=2 * DEFAULT_PARAMS.c1, c2=2 * DEFAULT_PARAMS.c2)
        assert arrhenius_tau(0.7, 56.0, 494.0, 0.25, doubled) == pytest.approx(
            arrhenius_tau(0.7, 56.0, 494.0, 0.25) / 2.0, rel=1e-12)

    def test_nonpositive_state_rejected(self):
        with pytest.raises(ValueError):
            arrhenius_tau(0.7, 0.0, 494.0, 0.25)
        with pytest.raises(ValueError):
            arrhenius_tau(0.7, 56.0, -1.0, 0.25)


def _cond(**kwargs):
    defaults = dict(n=1200.0, egr=0.25, phi=0.7,
                    ivc=ivc_state(2.0, 300.0, GEOM), x_r=0.0384, soi=0.0)
    defaults.update(kwargs)
    return OperatingCondition(**defaults)


class TestSocSimplified:
    def test_frozen_delay(self):
        # 1.70 deg ignition delay at the reference mid-load condition
        assert soc_simplified(_cond(), 56.0, 494.0) == pytest.approx(
            1.698819474601386, rel=1e-12)

    def test_affine_in_egr(self):
        p = DEFAULT_PARAMS
        base = soc_simplified(_cond(egr=0.0), 56.0, 494.0)
        slope = p.c1 * 1200.0 * 0.7 ** (-p.c3) * math.exp(p.c4 * 56.0**p.c5 / 494.0)
        for egr in (0.1, 0.25, 0.4):
            assert soc_simplified(_cond(egr=egr), 56.0, 494.0) == pytest.approx(
                base + slope * egr, rel=1e-12)

    def test_delay_proportional_to_speed(self):
        d1 = soc_simplified(_cond(n=1200.0), 56.0, 494.0)
        d2 = soc_simplified(_cond(n=2400.0), 56.0, 494.0)
        assert d2 == pytest.approx(2.0 * d1, rel=1e-12)

    def test_soi_passthrough(self):
        assert soc_simplified(_cond(soi=-3.0), 56.0, 494.0) == pytest.approx(
            soc_simplified(_cond(), 56.0, 494.0) - 3.0, rel=1e-12)


class TestSocFullIntegral:
    def test_constant_integrand_closed_form(self):
        # c4 = 0 collapses the exponential, making the rate constant in
        # crank angle: the crossing is exactly SOI + 1/rate
        params = ModelParams(c4=0.0)
        cond = _cond(soi=-2.0)
        rate = (cond.phi**params.c3
                / ((params.c1 * cond.egr + params.c2) * cond.n))
        expected = cond.soi + 1.0 / rate
        for step in (0.1, 0.01):
            assert soc_full_integral(cond, params, GEOM, step) == pytest.approx(
                expected, rel=1e-12)

    def test_midrange_point_against_oracle(self):
        cond = OperatingCondition(n=1350.0, egr=0.25, phi=0.7,
                                  ivc=ivc_state(3.6, 393.0, GEOM),
                                  x_r=0.04, soi=0.0)
        # frozen from the independent 0.001-deg trapezoid oracle
        assert soc_full_integral(cond, step=0.001) == pytest.approx(
            0.22697345312457856, abs=1e-9)
        assert soc_full_integral(cond, step=0.01) == pytest.approx(
            soc_oracle(cond), abs=1e-4)

    def test_long_delay_point_against_oracle(self):
        cond = _cond(soi=0.8)
        assert soc_full_integral(cond, step=0.001) == pytest.approx(
            soc_oracle(cond), abs=1e-9)
        assert soc_full_integral(cond, step=0.001) == pytest.approx(
            2.8492462099667786, abs=1e-9)

    def test_matches_simplified_when_state_barely_moves(self):
        # short-delay regime: freezing the state at injection is near exact
        cond = OperatingCondition(n=1350.0, egr=0.25, phi=0.7,
                                  ivc=ivc_state(3.6, 393.0, GEOM),
                                  x_r=0.04, soi=0.0)
        p_soi, t_soi = polytropic_state(0.0, cond.ivc, DEFAULT_PARAMS.kc, GEOM)
        full = soc_full_integral(cond, step=0.01)
        simplified = soc_simplified(cond, p_soi, t_soi)
        assert abs(full - simplified) <= 0.01  # within one step width

    def test_misfire_raises_with_context(self):
        cond = _cond(ivc=ivc_state(2.0, 120.0, GEOM))  # far too cold to ignite
        with pytest.raises(MisfireError) as excinfo:
            soc_full_integral(cond)
        assert excinfo.value.accumulated < 1.0
        assert excinfo.value.soi == 0.0

    def test_precondition_errors(self):
        with pytest.raises(ValueError, match="step"):
            soc_full_integral(_cond(), step=0.0)
        # a late-closing intake puts a valid SOI ahead of IVC
        from phasekit.engine import EngineGeometry
        late_ivc = EngineGeometry(bore=0.126, stroke=0.166, rod_length=0.251,
                                  compression_ratio=17.0, ivc_angle=-10.0)
        cond = _cond(soi=-15.0, ivc=ivc_state(2.0, 300.0, late_ivc))
        with pytest.raises(ValueError, match="IVC"):
            soc_full_integral(cond, geom=late_ivc)


class TestBurnDuration:
    def test_unit_factors(self):
        assert burn_duration(0.0, 1.0) == pytest.approx(DEFAULT_WIEBE.c6, rel=1e-12)

    def test_frozen_value(self):
        assert burn_duration(0.2884, 0.7) == pytest.approx(
            14.032542814923515, rel=1e-12)

    def test_monotone_in_dilution(self):
        values = [burn_duration(x, 0.7) for x in np.linspace(0.0, 0.6, 25)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            burn_duration(1.0, 0.7)
        with pytest.raises(ValueError):
            burn_duration(0.2, 0.0)


class TestWiebe:
    def test_zero_at_soc(self):
        assert wiebe_mfb(3.0, 3.0, 14.0) == 0.0

    def test_half_burn_inversion(self):
        w = DEFAULT_WIEBE
        theta_half = 3.0 + w.half_burn_factor * 14.0
        assert wiebe_mfb(theta_half, 3.0, 14.0, w) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_and_saturating(self):
        thetas = np.linspace(3.0, 120.0, 400)
        values = [wiebe_mfb(float(t), 3.0, 14.0) for t in thetas]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[-1] > 0.999999
        assert values[-1] <= 1.0

    def test_domain_errors(self):
        with pytest.raises(ValueError, match="precedes"):
            wiebe_mfb(2.9, 3.0, 14.0)
        with pytest.raises(ValueError):
            wiebe_mfb(4.0, 3.0, 0.0)

    def test_composite_consistency(self):
        # any (a, b) shape built from the same composite gives the same CA50
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = float(rng.uniform(2.0, 8.0))
            b = float(rng.uniform(1.2, 3.5))
            w = WiebeParams.from_composite(a, b, DEFAULT_PARAMS.c9)
            assert w.ca50_scale == pytest.approx(DEFAULT_PARAMS.c9, rel=1e-12)
            x_d, phi, soc = 0.2884, 0.7, 2.0
            bd = burn_duration(x_d, phi, w)
            by_root = brentq(lambda th: wiebe_mfb(th, soc, bd, w) - 0.5,
                             soc, soc + 10.0 * bd, xtol=1e-12)
            assert by_root == pytest.approx(soc + ca50_offset(x_d, phi), abs=1e-9)
            assert ca50_from_wiebe(soc, bd, w) == pytest.approx(
                soc + ca50_offset(x_d, phi), rel=1e-12)


class TestCa50:
    def test_offset_unit_factors_matches_composite_scale(self):
        assert ca50_offset(0.0, 1.0) == pytest.approx(4.784, rel=1e-15)

    def test_offset_frozen_value(self):
        assert ca50_offset(0.2884, 0.7) == pytest.approx(
            5.2247330333379765, rel=1e-12)

    def test_predict_is_exact_sum(self):
        cond = _cond()
        assert ca50_predict(cond, 56.0, 494.0) == soc_simplified(
            cond, 56.0, 494.0) + ca50_offset(cond.x_d, cond.phi)

    def test_predict_frozen_value(self):
        assert ca50_predict(_cond(), 56.0, 494.0) == pytest.approx(
            6.9235525079393625, rel=1e-12)

    def test_zero_dilution_reduction(self):
        p = DEFAULT_PARAMS
        cond = _cond(egr=0.0, x_r=0.0)
        expected = (p.c2 * 1200.0 * 0.7 ** (-p.c3)
                    * math.exp(p.c4 * 56.0**p.c5 / 494.0) + p.c9 * 0.7**p.c8)
        assert ca50_predict(cond, 56.0, 494.0) == pytest.approx(expected, rel=1e-12)

    def test_offset_independent_of_speed_pressure_temperature(self):
        for n in (1200.0, 1500.0):
            for p, t in ((40.0, 450.0), (90.0, 650.0)):
                cond = _cond(n=n)
                diff = ca50_predict(cond, p, t) - soc_simplified(cond, p, t)
                assert diff == pytest.approx(ca50_offset(cond.x_d, 0.7), rel=1e-12)

    def test_predict_phasing_wrapper(self):
        cond = _cond()
        p_soi, t_soi = polytropic_state(0.0, cond.ivc, DEFAULT_PARAMS.kc, GEOM)
        soc, ca50 = predict_phasing(cond)
        assert soc == soc_simplified(cond, p_soi, t_soi)
        assert ca50 == ca50_predict(cond, p_soi, t_soi)


class TestOperatingCondition:
    @pytest.mark.parametrize("kwargs", [
        dict(n=0.0), dict(egr=0.7), dict(egr=-0.1), dict(phi=0.0),
        dict(phi=1.5), dict(soi=25.0), dict(soi=-21.0), dict(x_r=1.0),
    ])
    def test_bounds_enforced(self, kwargs):
        with pytest.raises(ValueError):
            _cond(**kwargs)

    def test_dilution_property(self):
        assert _cond().x_d == pytest.approx(0.2884, rel=1e-12)
