import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import airy

from oracles import airy_zeros_oracle, power_law_levels
from rtm.airy import airy_ai, airy_zero, airy_zeros, asymptotic_zero
from rtm.spectrum import (ENERGY_SCALE, Spectrum, UnsupportedOrderError, bounce_period, classical_period,
                          classical_period_from_action, energy, energy_derivative, large_n_energy,
                          recurrence_time, recurrence_times, revival_time, revival_time_closed_form)

ORACLE = airy_zeros_oracle(200)


def test_ai_against_scipy():
    x = np.linspace(-60, 25, 4001)
    ai, aip = airy_ai(x)
    ref = airy(x)
    assert np.max(np.abs(ai - ref[0])) < 1e-12
    assert np.max(np.abs(aip - ref[1])) < 1e-11


def test_ai_scalar_input():
    ai, aip = airy_ai(0.0)
    assert isinstance(ai, float)
    assert ai == pytest.approx(airy(0.0)[0], rel=1e-15)


def test_first_zeros():
    assert airy_zero(1) == pytest.approx(2.33811, abs=1e-5)
    assert airy_zero(2) == pytest.approx(4.08795, abs=1e-5)


def test_first_asymptotic_zero():
    # direct evaluation of f(9 pi / 8) gives 2.33758
    assert airy_zero(1, "asymptotic") == pytest.approx(2.3373, abs=5e-4)
    assert abs(airy_zero(1, "asymptotic") / airy_zero(1) - 1) < 4e-4


def test_zeros_match_oracle():
    assert np.max(np.abs(airy_zeros(200) - ORACLE)) < 1e-10


def test_zeros_are_roots_and_counted():
    z = airy_zeros(300)
    assert np.max(np.abs(airy(-z)[0])) < 1e-12
    # exactly n-1 sign changes of Ai below z_n
    x = np.linspace(0, z[49] - 1e-6, 200001)
    signs = np.sign(airy(-x)[0])
    assert np.count_nonzero(np.diff(signs) != 0) == 49


def test_rejects_bad_index():
    with pytest.raises(ValueError):
        airy_zero(0)
    with pytest.raises(ValueError):
        airy_zero(-3)
    with pytest.raises(ValueError):
        airy_zero(2, mode="wkb")


def test_asymptotic_error_decreases():
    n = np.arange(1, 201)
    err = np.abs(asymptotic_zero(n) / ORACLE - 1)
    assert np.all(np.diff(err[:40]) < 0)
    assert np.all(err[9:] < 1e-6)


def test_zero_spacing_decreases():
    assert np.all(np.diff(np.diff(airy_zeros(200))) < 0)


def test_energy_values():
    assert energy(1) == pytest.approx(ENERGY_SCALE * 2.33811, abs=1e-5)
    assert energy(1) == pytest.approx(1.85576, abs=1e-5)


def test_energy_ratio_tends_to_four():
    ratios = [energy(8 * n) / energy(n) for n in (10, 100, 1000)]
    assert abs(ratios[-1] - 4) < abs(ratios[0] - 4)
    assert ratios[-1] == pytest.approx(4.0, rel=1e-3)


def test_level_176_near_drop_energy(cs_params):
    from rtm.physics import to_scaled
    assert energy(176) == pytest.approx(to_scaled(20.1e-6, "length", cs_params), rel=0.01)


def test_spectrum_invariants(spectrum400):
    e = spectrum400.energies
    assert np.all(np.diff(e) > 0) and np.all(e > 0)
    with pytest.raises(ValueError):
        e[0] = 1.0  # read-only


def test_large_n_closed_form_agreement(spectrum400):
    n = spectrum400.levels
    rel = np.abs(spectrum400.energies / large_n_energy(n) - 1)
    # (1/2)(3 pi n)^(2/3) drops the -1/4 shift of the zero index, so the
    # agreement is O(1/(6n)) and reaches 0.5% from n = 34 on
    assert np.all(rel[33:] < 5e-3)
    assert np.all(np.diff(rel) < 0)


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0]))
    with pytest.raises(ValueError):
        Spectrum(np.array([1.0, 1.0, 2.0]))


def test_energy_at_interpolates(spectrum400):
    assert spectrum400.energy_at(5) == spectrum400.energies[4]
    ps = Spectrum(power_law_levels(400))
    assert ps.energy_at(176.16) == pytest.approx(176.16 ** (2 / 3), rel=1e-9)
    assert ps.level_of(ps.energy_at(176.16)) == pytest.approx(176.16, rel=1e-12)


POWER = Spectrum(power_law_levels(800))


@pytest.mark.parametrize("n0", [50.0, 176.16, 500.0])
def test_derivatives_of_power_law(n0):
    assert energy_derivative(POWER, n0, 1) == pytest.approx((2 / 3) * n0 ** (-1 / 3), rel=1e-3)
    assert energy_derivative(POWER, n0, 2) == pytest.approx(-(2 / 9) * n0 ** (-4 / 3), rel=1e-2)


def test_third_order_recurrence_on_power_law():
    n0 = 176.16
    d3 = (2 / 3) * (-1 / 3) * (-4 / 3) * n0 ** (-7 / 3)
    assert recurrence_time(3, n0, POWER) == pytest.approx(2 * math.pi * 6 / abs(d3), rel=0.02)


def test_unsupported_order(spectrum400):
    with pytest.raises(UnsupportedOrderError):
        recurrence_time(4, 100, spectrum400)
    with pytest.raises(UnsupportedOrderError):
        energy_derivative(spectrum400, 100, 0)


def test_derivative_range(spectrum400):
    with pytest.raises(ValueError):
        energy_derivative(spectrum400, 1.5, 1)
    with pytest.raises(ValueError):
        energy_derivative(spectrum400, 399.5, 2)


def test_recurrence_time_generalizes(spectrum400):
    n0 = 176.16
    assert recurrence_time(1, n0, spectrum400) == classical_period(n0, spectrum400)
    assert recurrence_time(2, n0, spectrum400) == revival_time(n0, spectrum400)


def test_first_derivative_matches_period(spectrum400):
    n0 = 176.16
    assert energy_derivative(spectrum400, n0, 1) == pytest.approx(
        2 * math.pi / classical_period(n0, spectrum400), rel=0.01)


@pytest.mark.parametrize("n0", [50.0, 120.0, 176.16, 300.0])
def test_period_matches_bounce(spectrum400, n0):
    e = spectrum400.energy_at(n0)
    assert classical_period(n0, spectrum400) == pytest.approx(bounce_period(e), rel=0.01)


def test_cs_period_and_revival(cs_params, spectrum400):
    from rtm.physics import from_scaled, to_scaled
    z0 = float(to_scaled(20.1e-6, "length", cs_params))
    assert from_scaled(bounce_period(z0), "time", cs_params) == pytest.approx(4.05e-3, rel=5e-3)
    assert from_scaled(revival_time_closed_form(z0), "time", cs_params) == pytest.approx(4.3, rel=0.01)
    d = revival_time(176.16, spectrum400)
    c = revival_time(176.16, spectrum400, method="closed_form")
    assert abs(d / c - 1) < 0.02


def test_closed_form_scaling():
    assert revival_time_closed_form(2.0) == pytest.approx(4 * revival_time_closed_form(1.0))
    assert bounce_period(2.0) == pytest.approx(math.sqrt(2) * bounce_period(1.0))


def test_methods_converge_with_n(spectrum400):
    gaps = []
    big = Spectrum.triangular(600)
    for n0 in (50, 150, 500):
        gaps.append(abs(revival_time(n0, big) / revival_time(n0, big, "closed_form") - 1))
    assert gaps[0] < 0.02 and gaps[2] < 5e-3
    assert gaps[0] > gaps[1] > gaps[2]


def test_action_form_is_hbar_independent(spectrum400):
    for hbar in (1.0, 0.37, 1.054571817e-34):
        assert classical_period_from_action(176.16 * hbar, spectrum400, hbar) == pytest.approx(
            recurrence_time(1, 176.16, spectrum400, hbar=hbar), rel=1e-12)


def test_revival_exceeds_period_everywhere():
    sp = Spectrum.triangular(520)
    for n0 in np.arange(3, 505, 7):
        times = recurrence_times(float(n0), sp)
        assert times.revival_time > times.classical_period


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400))
def test_zero_is_isolated_root(n):
    z = airy_zero(n)
    assert abs(airy(-z)[0]) < 1e-12
    assert z == pytest.approx(airy_zeros(n)[-1], rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(3.0, 397.0))
def test_level_of_inverts_energy_at(n):
    sp = Spectrum.triangular(400)
    assert sp.level_of(sp.energy_at(n)) == pytest.approx(n, rel=1e-11)
