"""Exact solutions, wave generators, dispersion, and bathymetry profiles."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from serre1d import analytic
from serre1d.analytic import (BathymetryProfile, SolitaryParams,
                              SteadyStateParams, bathymetry_eval)

STEADY = SteadyStateParams(h0=1.0, a=0.2, g=9.81)


class TestSteadyStateExact:
    def test_reference_constants(self):
        _, q, _, r = analytic.steady_state_exact(0.0, STEADY)
        assert q == pytest.approx(math.sqrt(5.886), rel=1e-12)
        assert r == pytest.approx(math.sqrt(0.5), rel=1e-12)

    def test_far_field_limits(self):
        h, _, z, _ = analytic.steady_state_exact(np.array([-50.0, 50.0]),
                                                 STEADY)
        assert h == pytest.approx([1.0, 1.0], abs=1e-12)
        assert z == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_crest_values_and_bed_relation(self):
        x = np.linspace(-10.0, 10.0, 201)
        h, _, z, _ = analytic.steady_state_exact(x, STEADY)
        assert h[100] == pytest.approx(1.2, rel=1e-14)
        assert z[100] == pytest.approx(-0.1, rel=1e-14)
        assert np.abs(z + 0.5 * (h - 1.0)).max() <= 1e-14

    def test_flow_invariant_along_channel(self):
        # the exact profile keeps h/2 + q^2/(2 g h^2) plus the dispersive
        # correction terms constant in x; evaluated with exact derivatives
        # of the ansatz the residual is rounding-level
        x = np.linspace(-12.0, 12.0, 1000)
        h, q, _, r = analytic.steady_state_exact(x, STEADY)
        g, h0 = STEADY.g, STEADY.h0
        th = np.tanh(r * x)
        sech2 = 1.0 / np.cosh(r * x) ** 2
        hp = -2.0 * h0 * STEADY.a * r * sech2 * th
        hpp = -2.0 * h0 * STEADY.a * r * r * sech2 * (sech2 - 2.0 * th * th)
        invariant = (0.5 * h + q * q / (2.0 * g * h * h)
                     - q * q / (24.0 * g * h * h) * hp * hp
                     + q * q / (12.0 * g * h) * hpp)
        const = 0.5 * h0 + q * q / (2.0 * g * h0 * h0)
        assert np.abs(invariant - const).max() <= 1e-10

    def test_mass_excess_matches_quadrature(self):
        p = SolitaryParams(h0=0.25, alpha=0.05, x0=3.7)
        r = analytic.solitary_width(p)
        closed = 2.0 * p.alpha / r
        for x0 in (0.0, 3.7, -11.0):
            shifted = SolitaryParams(h0=0.25, alpha=0.05, x0=x0)
            excess, _ = quad(
                lambda x: analytic.solitary_wave(x, 0.0, shifted)[0] - 0.25,
                x0 - 60.0, x0 + 60.0)
            assert excess == pytest.approx(closed, rel=1e-9)


class TestSolitaryWave:
    def test_zero_amplitude_is_still_water(self):
        p = SolitaryParams(h0=0.3, alpha=0.0, x0=0.0)
        h, u = analytic.solitary_wave(np.linspace(-5, 5, 11), 0.0, p)
        assert np.all(h == 0.3)
        assert np.all(u == 0.0)

    def test_speed_formula(self):
        p = SolitaryParams(h0=0.125, alpha=0.0475, x0=0.0)
        c = analytic.solitary_speed(p)
        assert c == pytest.approx(math.sqrt(9.81 * 0.1725), rel=1e-13)
        assert c == pytest.approx(1.3008555, rel=1e-7)

    def test_crest_values(self):
        p = SolitaryParams(h0=0.125, alpha=0.0475, x0=-2.0)
        c = analytic.solitary_speed(p)
        h, u = analytic.solitary_wave(-2.0, 0.0, p)
        assert h == pytest.approx(0.1725, rel=1e-14)
        assert u == pytest.approx(c * 0.0475 / 0.1725, rel=1e-14)

    def test_travels_at_speed_c(self):
        p = SolitaryParams(h0=0.25, alpha=0.05, x0=1.0)
        c = analytic.solitary_speed(p)
        h1, _ = analytic.solitary_wave(1.0 + 2.0 * c, 2.0, p)
        assert h1 == pytest.approx(0.30, rel=1e-13)


class TestSolitaryInitialCondition:
    def test_flat_zero_amplitude_is_lake(self):
        x = np.linspace(-5.0, 5.0, 101)
        z = np.zeros_like(x)
        p = SolitaryParams(h0=0.4, alpha=0.0, x0=0.0)
        h, q, q1, q2, q3 = analytic.solitary_initial_condition(x, z, z, p)
        assert np.all(h == 0.4)
        assert np.all(q == 0.0) and np.all(q2 == 0.0) and np.all(q3 == 0.0)
        assert np.array_equal(q1, h * h)

    def test_equilibrium_fields(self):
        x = np.linspace(-10.0, 10.0, 401)
        prof = BathymetryProfile(tag="smoothed-step", h0=0.25, smoothing=0.1)
        z, dzdx = bathymetry_eval(prof, x)
        p = SolitaryParams(h0=0.25, alpha=0.05, x0=-5.0)
        h, q, q1, q2, q3 = analytic.solitary_initial_condition(x, z, dzdx, p)
        assert np.array_equal(q1, h * h)
        assert np.array_equal(q3, q * dzdx)

    def test_q3_zero_on_flat_section(self):
        x = np.linspace(-5.0, 5.0, 101)
        z = np.zeros_like(x)
        p = SolitaryParams(h0=0.25, alpha=0.05, x0=0.0)
        _, _, _, _, q3 = analytic.solitary_initial_condition(x, z, z, p)
        assert np.all(q3 == 0.0)


class TestDispersion:
    def test_shallow_water_limit(self):
        sigma = 1e-5
        k = analytic.dispersion_wavenumber(sigma, 0.4)
        assert k == pytest.approx(sigma / math.sqrt(9.81 * 0.4), rel=1e-9)

    def test_reference_value(self):
        sigma = 2.0 * math.pi / 2.01975
        k = analytic.dispersion_wavenumber(sigma, 0.4)
        expected = math.sqrt(3.0 * sigma ** 2
                             / (3.0 * 9.81 * 0.4 - 0.16 * sigma ** 2))
        assert k == pytest.approx(expected, rel=1e-14)

    def test_beyond_range_raises(self):
        sigma_max = math.sqrt(3.0 * 9.81 / 0.4)
        with pytest.raises(ValueError, match="dispersion range"):
            analytic.dispersion_wavenumber(sigma_max, 0.4)
        with pytest.raises(ValueError):
            analytic.dispersion_wavenumber(2.0 * sigma_max, 0.4)


class TestPeriodicWaveTarget:
    def test_zero_amplitude(self):
        h, u = analytic.periodic_wave_target(
            np.linspace(0, 5, 20), 1.0, 0.0, 2.0, 3.0, 0.4)
        assert np.all(h == 0.4) and np.all(u == 0.0)

    def test_in_phase(self):
        x = np.linspace(0.0, 10.0, 500)
        h, u = analytic.periodic_wave_target(x, 0.7, 0.01, 2.0, 3.0, 0.4)
        assert np.all(np.sign(h - 0.4) == np.sign(u))


class TestBathymetry:
    def test_triangle_peak(self):
        prof = BathymetryProfile(tag="smoothed-triangle", h0=0.125,
                                 smoothing=0.075)
        z, _ = bathymetry_eval(prof, np.array([0.0]))
        assert z[0] == 0.1

    def test_triangle_compact_support(self):
        prof = BathymetryProfile(tag="smoothed-triangle", h0=0.125,
                                 smoothing=0.075)
        z, dzdx = bathymetry_eval(prof, np.array([-5.0, 5.0]))
        assert np.all(z == 0.0) and np.all(dzdx == 0.0)

    def test_step_limits_and_midpoint(self):
        prof = BathymetryProfile(tag="smoothed-step", h0=0.25, smoothing=0.05)
        z, _ = bathymetry_eval(prof, np.array([-1e6, 0.0, 1e6]))
        assert z[0] == pytest.approx(0.0, abs=1e-7)
        assert z[1] == pytest.approx(0.05, rel=1e-14)
        assert z[2] == pytest.approx(0.1, abs=1e-7)

    def test_smoothing_reference_rule(self):
        # the regularization constant is frozen so that a 1600-element mesh
        # on the 40 m domain yields a 0.075 m smoothing length
        for h0 in (0.125, 0.150):
            d = analytic.smoothing_constant(h0, 40.0)
            ell = analytic.smoothing_length(d, h0, 40.0 / 1600)
            assert ell == pytest.approx(0.075, rel=1e-12)

    def test_beach_geometry(self):
        prof = BathymetryProfile(tag="beach", h0=0.25, datum_offset=0.25)
        x = np.array([0.0, 2.5, 10.0, 32.5])
        z, dzdx = bathymetry_eval(prof, x)
        assert z[0] == 0.0 and dzdx[0] == 0.0
        assert z[1] == 0.0 and dzdx[1] == pytest.approx(0.5 / 30.0)
        assert z[2] == pytest.approx(7.5 / 30.0, rel=1e-14)
        assert z[3] == pytest.approx(1.0, rel=1e-14)
        assert dzdx[2] == pytest.approx(1.0 / 30.0)

    def test_bar_geometry(self):
        prof = BathymetryProfile(tag="trapezoid-bar", h0=0.4)
        x = np.array([0.0, 6.0, 9.0, 12.0, 13.0, 14.0, 15.5, 17.0, 20.0])
        z, dzdx = bathymetry_eval(prof, x)
        assert z[0] == 0.0
        assert z[2] == pytest.approx(0.15, rel=1e-14)
        assert z[3] == pytest.approx(0.3, rel=1e-14)
        assert z[4] == pytest.approx(0.3, rel=1e-14)
        assert z[6] == pytest.approx(0.3 - 1.5 / 10.0, rel=1e-14)
        assert z[8] == 0.0
        assert dzdx[2] == pytest.approx(1.0 / 20.0)
        assert dzdx[6] == pytest.approx(-1.0 / 10.0)
        # kink nodes average the adjacent one-sided slopes
        assert dzdx[1] == pytest.approx(0.5 / 20.0)
        assert dzdx[7] == pytest.approx(-0.5 / 10.0)

    def test_smoothed_profiles_converge_to_sharp(self):
        x = np.linspace(-2.0, 2.0, 801)
        sharp = np.maximum(0.1 - (10.0 / 7.05) * np.abs(x), 0.0)
        sup_errors = []
        for ell in (0.1, 0.05, 0.025, 0.0125):
            prof = BathymetryProfile(tag="smoothed-triangle", h0=0.125,
                                     smoothing=ell)
            z, _ = bathymetry_eval(prof, x)
            sup_errors.append(np.abs(z - sharp).max())
        assert all(b < a for a, b in zip(sup_errors, sup_errors[1:]))

    def test_analytic_slope_matches_finite_differences(self):
        x = np.linspace(-3.0, 3.0, 501)
        step = 1e-6
        for tag, kwargs in (("smoothed-step", {"smoothing": 0.05}),
                            ("soliton-bump", {"bump_amplitude": 0.2}),
                            ("smoothed-triangle", {"smoothing": 0.075})):
            prof = BathymetryProfile(tag=tag, h0=1.0, **kwargs)
            z_p, _ = bathymetry_eval(prof, x + step)
            z_m, _ = bathymetry_eval(prof, x - step)
            _, dzdx = bathymetry_eval(prof, x)
            fd = (z_p - z_m) / (2.0 * step)
            scale = max(np.abs(dzdx).max(), 1.0)
            # skip the triangle's support boundary where z clips to 0
            interior = np.abs(dzdx - fd) <= 1e-6 * scale
            assert interior.mean() > 0.99

    def test_unknown_tag_raises(self):
        with pytest.raises(ValueError, match="unknown bathymetry tag"):
            bathymetry_eval(BathymetryProfile(tag="volcano"), np.zeros(3))
