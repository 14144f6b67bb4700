"""Tests of the quarter-wave filter network model."""

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluxline import network as nw
from fluxline.errors import (
    HalfFluxDivergence,
    NoRootFound,
    OverCritical,
    TangentPole,
)


class TestSquidArray:
    def test_critical_current_zero_flux(self, squid_array):
        assert nw.squid_critical_current(squid_array, 0.0) == pytest.approx(20e-6)

    def test_critical_current_half_flux(self, squid_array):
        assert nw.squid_critical_current(squid_array, 0.5) == pytest.approx(0.0, abs=1e-20)

    def test_critical_current_third_flux(self, squid_array):
        # 2 * 10 uA * cos(pi/3) = 10 uA
        assert nw.squid_critical_current(squid_array, 1.0 / 3.0) == pytest.approx(10e-6)

    @given(flux=st.floats(-3, 3), shift=st.integers(-2, 2))
    def test_critical_current_periodic_and_even(self, flux, shift):
        arr = nw.SquidArray(**{"n_squids": 5, "ic_junction": 10e-6})
        a = nw.squid_critical_current(arr, flux)
        assert nw.squid_critical_current(arr, flux + shift) == pytest.approx(a, rel=1e-9, abs=1e-18)
        assert nw.squid_critical_current(arr, -flux) == pytest.approx(a, rel=1e-12, abs=1e-30)

    def test_inductance_zero_flux(self, squid_array):
        # 5 * Phi0 / (4 pi * 10 uA)
        l_arr = nw.squid_array_inductance(squid_array, 0.0)
        assert l_arr == pytest.approx(5 * nw.PHI0 / (4 * math.pi * 10e-6), rel=1e-12)
        assert l_arr == pytest.approx(8.23e-11, rel=1e-3)

    def test_single_squid_is_half_junction_inductance(self):
        arr = nw.SquidArray(n_squids=1, ic_junction=10e-6)
        l_sq = nw.squid_array_inductance(arr, 0.0)
        l_junction = nw.PHI0 / (2 * math.pi * 10e-6)  # single 10 uA junction
        assert l_junction == pytest.approx(0.033e-9, rel=0.01)
        assert l_sq == pytest.approx(l_junction / 2, rel=1e-12)
        assert l_sq == pytest.approx(0.0165e-9, rel=0.01)

    def test_half_flux_strict_raises(self, squid_array):
        with pytest.raises(HalfFluxDivergence):
            nw.squid_array_inductance(squid_array, 0.5, mode="strict")

    def test_half_flux_clamped(self, squid_array):
        l_arr = nw.squid_array_inductance(squid_array, 0.5, mode="clamped")
        ic_clamped = squid_array.clamp_epsilon * 2 * squid_array.ic_junction
        expected = 5 * nw.PHI0 / (2 * math.pi * ic_clamped)
        assert l_arr == pytest.approx(expected, rel=1e-12)

    def test_kerr_correction_positive_and_small(self, squid_array):
        l0 = nw.squid_array_inductance(squid_array, 0.0)
        l1 = nw.squid_array_inductance(squid_array, 0.0, i_ac=1e-6)
        ic_sq = 20e-6
        kerr = 5 * nw.PHI0 / (4 * math.pi) * (1e-6) ** 2 / ic_sq**3
        assert l1 - l0 == pytest.approx(kerr, rel=1e-12)

    def test_over_critical_raises(self, squid_array):
        with pytest.raises(OverCritical):
            nw.squid_array_inductance(squid_array, 0.0, i_ac=25e-6)

    def test_l_fixed_adds_linearly(self):
        arr = nw.SquidArray(n_squids=5, ic_junction=10e-6, l_fixed_per_squid=30e-12)
        base = nw.SquidArray(n_squids=5, ic_junction=10e-6)
        diff = (nw.squid_array_inductance(arr, 0.2)
                - nw.squid_array_inductance(base, 0.2))
        assert diff == pytest.approx(5 * 30e-12, rel=1e-12)

    @given(flux=st.floats(0, 0.49))
    @settings(max_examples=50)
    def test_inductance_monotone_toward_half_flux(self, flux):
        arr = nw.SquidArray(n_squids=5, ic_junction=10e-6)
        assert (nw.squid_array_inductance(arr, flux + 0.005)
                >= nw.squid_array_inductance(arr, flux))

    def test_invariants_validated(self):
        with pytest.raises(ValueError):
            nw.SquidArray(n_squids=0, ic_junction=10e-6)
        with pytest.raises(ValueError):
            nw.SquidArray(n_squids=5, ic_junction=-1e-6)
        with pytest.raises(ValueError):
            nw.SquidArray(n_squids=5, ic_junction=10e-6, clamp_epsilon=0.5)


class TestInputImpedance:
    def test_quarter_wave_short(self, geometry):
        geom = replace(geometry, x_s=0.0)
        z = nw.input_impedance(geom, 0.0, geometry.omega0)
        assert abs(z) < 1e-6

    def test_short_independent_of_xs(self, geometry):
        z = nw.input_impedance(geometry, 0.0, geometry.omega0)
        assert abs(z) < 1e-6

    def test_half_frequency_value(self, geometry):
        # Open stub at half the quarter-wave frequency: the tan-transform
        # chain gives -i z0 cot(pi/4) = -i z0 (capacitive below resonance).
        geom = replace(geometry, x_s=0.0)
        z = nw.input_impedance(geom, 0.0, geometry.omega0 / 2)
        assert z.real == 0.0
        assert z.imag == pytest.approx(-geometry.z0, rel=1e-12)

    def test_purely_imaginary(self, geometry):
        for f in (2.1e9, 3.7e9, 5.2e9):
            z = nw.input_impedance(geometry, 0.075e-9, 2 * math.pi * f)
            assert z.real == 0.0

    def test_sign_change_across_root(self, geometry):
        l_s = 0.075e-9
        f_root = nw.filter_frequency_exact(geometry, l_s)
        below = nw.input_impedance(geometry, l_s, 2 * math.pi * f_root * (1 - 1e-6))
        above = nw.input_impedance(geometry, l_s, 2 * math.pi * f_root * (1 + 1e-6))
        assert below.imag * above.imag < 0

    def test_tangent_pole_raises(self, geometry):
        # beta * x_s = pi/2 puts tan at its pole
        omega = math.pi * geometry.v_p / (2 * geometry.x_s)
        with pytest.raises(TangentPole):
            nw.input_impedance(geometry, 0.0, omega)

    def test_end_cap_shifts_down(self, geometry):
        with_cap = replace(geometry, c_g=5e-15)
        f_bare = nw.filter_frequency_exact(geometry, 0.0)
        f_cap = nw.filter_frequency_exact(with_cap, 0.0)
        assert f_cap < f_bare


class TestFilterFrequency:
    def test_first_order_values(self):
        assert nw.filter_frequency_first_order(4.5e9, 0.0, 50.0) == 4.5e9
        # 4.5 GHz / (1 + 0.027)
        assert nw.filter_frequency_first_order(4.5e9, 0.075e-9, 50.0) == pytest.approx(
            4.3817e9, rel=1e-4)

    def test_first_order_decreasing(self):
        f = [nw.filter_frequency_first_order(4.5e9, ls, 50.0)
             for ls in np.linspace(0, 1e-9, 20)]
        assert np.all(np.diff(f) < 0)

    def test_exact_quarter_wave_identity(self, geometry):
        f = nw.filter_frequency_exact(geometry, 0.0)
        assert abs(f - geometry.f0) / geometry.f0 < 1e-9

    def test_exact_matches_first_order_small_pull(self, geometry):
        geom = replace(geometry, x_s=0.0)
        l_s = 0.075e-9
        f_exact = nw.filter_frequency_exact(geom, l_s)
        f_first = nw.filter_frequency_first_order(geom.f0, l_s, geom.z0)
        assert abs(f_first - f_exact) / f_exact < 0.01

    def test_first_order_agreement_up_to_0p3(self, geometry):
        geom = replace(geometry, x_s=0.0)
        for scale in np.linspace(0.01, 0.3, 15):
            l_s = scale * geom.z0 / (4 * geom.f0)
            f_exact = nw.filter_frequency_exact(geom, l_s)
            f_first = nw.filter_frequency_first_order(geom.f0, l_s, geom.z0)
            assert abs(f_first - f_exact) / f_exact <= 0.01

    def test_inductor_at_open_end_no_participation(self, geometry):
        geom = replace(geometry, x_s=geometry.l_f)
        for l_s in (0.075e-9, 1e-9, 5e-9):
            f = nw.filter_frequency_exact(geom, l_s)
            assert abs(f - geometry.f0) / geometry.f0 < 1e-9

    def test_monotone_pull_in_inductance(self, geometry):
        f_prev = math.inf
        for l_s in np.linspace(0.0, 1.5e-9, 12):
            f = nw.filter_frequency_exact(geometry, l_s)
            assert f <= f_prev * (1 + 1e-12)
            f_prev = f

    def test_no_root_reports_diagnostics(self, geometry):
        with pytest.raises(NoRootFound) as err:
            nw.filter_frequency_exact(geometry, 1e-6)  # 1 uH: far outside window
        assert "n_sign_changes" in err.value.diagnostics

    @given(
        z0=st.floats(20, 120),
        v_p=st.floats(0.8e8, 2.0e8),
        l_f=st.floats(2e-3, 2e-2),
        frac=st.floats(0, 1),
    )
    @settings(max_examples=30, deadline=None)
    def test_quarter_wave_identity_random_geometry(self, z0, v_p, l_f, frac):
        geom = nw.FilterGeometry(z0=z0, v_p=v_p, l_f=l_f, x_s=frac * l_f)
        f = nw.filter_frequency_exact(geom, 0.0)
        assert abs(f - geom.f0) / geom.f0 < 1e-9


class TestPerturbativePull:
    def test_zero_at_open_end(self, geometry):
        geom = replace(geometry, x_s=geometry.l_f)
        assert nw.perturbative_pull(geom, 0.075e-9) == pytest.approx(0.0, abs=1e-15)

    def test_matches_first_order_at_node(self, geometry):
        # At x_s = 0 the leverage is 1 and the pull reduces to
        # -(2/pi) w0 l_s / z0 = -4 f0 l_s / z0.
        geom = replace(geometry, x_s=0.0)
        l_s = 1e-12
        assert nw.perturbative_pull(geom, l_s) == pytest.approx(
            -4 * geom.f0 * l_s / geom.z0, rel=1e-12)

    def test_against_exact_root_small_inductance(self, geometry):
        # 4 f0 l_s / z0 = 0.05
        l_s = 0.05 * geometry.z0 / (4 * geometry.f0)
        exact_shift = (nw.filter_frequency_exact(geometry, l_s) - geometry.f0) / geometry.f0
        pull = nw.perturbative_pull(geometry, l_s)
        assert pull < 0
        assert abs(pull - exact_shift) / abs(exact_shift) <= 0.10

    def test_non_increasing_magnitude_in_position(self, geometry):
        pulls = [abs(nw.perturbative_pull(replace(geometry, x_s=x), 0.075e-9))
                 for x in np.linspace(0, geometry.l_f, 30)]
        assert np.all(np.diff(pulls) <= 1e-18)


class TestCurrentProfile:
    def test_open_end_node_and_normalization(self, geometry):
        geom = replace(geometry, x_s=0.0)
        x, cur = nw.current_profile(geom, 0.0, geometry.omega0, i0=1e-6, n_points=64)
        assert abs(cur[-1]) == 0.0
        assert cur[0] == pytest.approx(1e-6, rel=1e-12)

    def test_quarter_wave_profile_shape(self, geometry):
        x, cur = nw.current_profile(geometry, 0.0, geometry.omega0, i0=1.0, n_points=200)
        beta = geometry.omega0 / geometry.v_p
        expected = np.sin(beta * (geometry.l_f - x)) / math.sin(beta * geometry.l_f)
        assert np.allclose(cur.real, expected, atol=1e-9)

    def test_continuity_across_inductor(self, geometry):
        l_s = 0.3e-9
        omega = 2 * math.pi * 4.0e9
        x, cur = nw.current_profile(geometry, l_s, omega, i0=1.0, n_points=100001)
        k = np.searchsorted(x, geometry.x_s)
        step = abs(cur[k + 1] - cur[k - 1]) / max(abs(cur[k]), 1e-300)
        assert step < 1e-3  # grid-spacing-limited, no jump at the inductor

    def test_branch_values_agree_at_junction(self, geometry):
        # evaluate both branch expressions exactly at x_s
        l_s = 0.3e-9
        omega = 2 * math.pi * 4.0e9
        beta = omega / geometry.v_p
        factor = nw._inductor_current_factor(geometry, l_s, omega)
        l_r = geometry.l_f - geometry.x_s
        cot_r = math.cos(beta * l_r) / math.sin(beta * l_r)
        coeff = cot_r - omega * l_s / geometry.z0
        left = factor * (math.cos(0.0) + coeff * math.sin(0.0))
        right = factor * math.sin(beta * l_r) / math.sin(beta * l_r)
        assert left == pytest.approx(right, rel=1e-12)

    def test_max_open_end_leak_over_sweep(self, geometry):
        worst = 0.0
        for f in np.linspace(3.6e9, 4.4e9, 7):
            x, cur = nw.current_profile(geometry, 0.2e-9, 2 * math.pi * f, i0=1.0)
            worst = max(worst, abs(cur[-1]) / abs(cur[0]))
        assert worst < 1e-9


class TestNonlinearityMargin:
    def test_values(self):
        assert nw.nonlinearity_margin(0.5e-6, 20e-6) == (pytest.approx(0.125), True)
        assert nw.nonlinearity_margin(0.0, 20e-6) == (pytest.approx(0.0), True)
        margin, ok = nw.nonlinearity_margin(2e-6, 20e-6)
        assert margin == pytest.approx(0.5)
        assert not ok

    def test_requires_positive_ic(self):
        with pytest.raises(ValueError):
            nw.nonlinearity_margin(1e-6, 0.0)


class TestQubitAdmittance:
    def test_cancellation_at_filter_frequency(self, geometry, squid_array):
        for flux in (0.0, 0.2, 0.35):
            l_s = nw.squid_array_inductance(squid_array, flux)
            f_f = nw.filter_frequency_exact(geometry, l_s)
            y = nw.qubit_admittance(geometry, l_s, 2 * math.pi * f_f)
            assert y.real < 1e-15
            assert y.imag == pytest.approx(2 * math.pi * f_f * geometry.c_d, rel=1e-6)

    def test_decoupled_without_coupler(self, geometry):
        geom = replace(geometry, c_d=0.0)
        assert nw.qubit_admittance(geom, 0.075e-9, 2 * math.pi * 4e9) == 0j

    def test_finite_off_resonance(self, geometry):
        l_s = 0.075e-9
        f_f = nw.filter_frequency_exact(geometry, l_s)
        y = nw.qubit_admittance(geometry, l_s, 2 * math.pi * (f_f - 100e6))
        assert y.real > 0

    @given(f=st.floats(2.0e9, 5.3e9))
    @settings(max_examples=60)
    def test_passivity(self, f):
        geom = nw.FilterGeometry(z0=50.0, v_p=1.17e8, l_f=6.5e-3, x_s=2.0e-3,
                                 c_g=2e-15, c_d=4.4e-15)
        try:
            y = nw.qubit_admittance(geom, 0.2e-9, 2 * math.pi * f)
        except TangentPole:
            return
        assert y.real >= 0


class TestCouplingFigures:
    def test_reciprocal_t1(self, geometry, squid_array):
        qubit = nw.QubitLoad(f_q=3.9e9, c_q=143e-15)
        figs = nw.coupling_figures(geometry, squid_array, qubit, 0.3, 4.2e9)
        assert figs.t1_ext == pytest.approx(1.0 / figs.gamma_qf, rel=1e-12)
        assert figs.t1_total == figs.t1_ext  # no internal loss channel

    def test_total_t1_capped_by_internal(self, geometry, squid_array, qubit):
        figs = nw.coupling_figures(geometry, squid_array, qubit, 0.3, 4.2e9)
        assert figs.t1_total <= min(figs.t1_ext, qubit.t1_internal) * (1 + 1e-12)
        expected = 1.0 / (1.0 / figs.t1_ext + 1.0 / qubit.t1_internal)
        assert figs.t1_total == pytest.approx(expected, rel=1e-12)

    def test_drive_at_filter_frequency_restores_internal_t1(
            self, geometry, squid_array, qubit):
        l_s = nw.squid_array_inductance(squid_array, 0.25)
        f_f = nw.filter_frequency_exact(geometry, l_s)
        figs = nw.coupling_figures(geometry, squid_array, qubit, 0.25, f_f)
        assert figs.gamma_qf < 1e-15 / qubit.c_q
        assert figs.t1_total == pytest.approx(qubit.t1_internal, rel=1e-6)

    def test_rabi_normalized_at_reference(self, geometry, squid_array, qubit):
        figs = nw.coupling_figures(geometry, squid_array, qubit, 0.0, 4.2e9)
        assert figs.rabi_relative == pytest.approx(1.0, rel=1e-12)

    def test_strict_mode_propagates_half_flux(self, geometry, squid_array, qubit):
        with pytest.raises(HalfFluxDivergence):
            nw.coupling_figures(geometry, squid_array, qubit, 0.5, 4.2e9, mode="strict")


class TestFluxSweep:
    def test_single_point_matches_individual_ops(self, geometry, squid_array, qubit):
        rows = nw.flux_sweep(geometry, squid_array, qubit, [0.0], 4.2e9)
        assert len(rows) == 1
        row = rows[0]
        figs = nw.coupling_figures(geometry, squid_array, qubit, 0.0, 4.2e9,
                                   mode="clamped")
        assert row.gamma_qf == pytest.approx(figs.gamma_qf, rel=1e-12)
        assert row.l_j_arr == pytest.approx(
            nw.squid_array_inductance(squid_array, 0.0), rel=1e-12)
        assert row.f_f == pytest.approx(
            nw.filter_frequency_exact(geometry, row.l_j_arr), rel=1e-12)

    def test_periodic_columns(self, geometry, squid_array, qubit):
        rows = nw.flux_sweep(geometry, squid_array, qubit, [0.0, 0.25, 1.0, 1.25],
                             4.2e9)
        assert rows[0].gamma_qf == pytest.approx(rows[2].gamma_qf, rel=1e-9)
        assert rows[1].gamma_qf == pytest.approx(rows[3].gamma_qf, rel=1e-9)
        assert rows[0].f_f == pytest.approx(rows[2].f_f, rel=1e-12)

    def test_half_flux_clamped_row(self, geometry, squid_array, qubit):
        rows = nw.flux_sweep(geometry, squid_array, qubit, [0.5], 4.2e9,
                             mode="clamped")
        row = rows[0]
        ic_clamped = squid_array.clamp_epsilon * 2 * squid_array.ic_junction
        expected_l = 5 * nw.PHI0 / (2 * math.pi * ic_clamped)
        assert row.l_j_arr == pytest.approx(expected_l, rel=1e-12)
        # the clamped inductance is far outside the tuning window
        assert row.error == "NoRootFound"

    def test_half_flux_strict_row_marker(self, geometry, squid_array, qubit):
        rows = nw.flux_sweep(geometry, squid_array, qubit, [0.3, 0.5], 4.2e9,
                             mode="strict")
        assert rows[0].error is None
        assert rows[1].error == "HalfFluxDivergence"
        assert math.isnan(rows[1].gamma_qf)

    def test_empty_grid_rejected(self, geometry, squid_array, qubit):
        with pytest.raises(ValueError):
            nw.flux_sweep(geometry, squid_array, qubit, [], 4.2e9)
