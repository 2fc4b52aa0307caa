import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from oracles import CS_MASS, G, HBAR, cs_length_unit, cs_time_unit
from rtm.physics import (PhysicalParams, ScaledUnits, ValidityParams, ValidityWarning,
                         check_spontaneous_emission, from_scaled, impact_speed_from_drop,
                         rabi_from_light_shift, spontaneous_emission_probability, to_scaled)

KINDS = ["length", "time", "energy", "frequency", "wavevector", "velocity", "momentum"]


def test_cs_units_match_direct_formulas(cs_params):
    u = cs_params.units
    assert u.length_unit == pytest.approx(cs_length_unit(), rel=1e-14)
    assert u.time_unit == pytest.approx(cs_time_unit(), rel=1e-14)
    assert u.energy_unit == pytest.approx(CS_MASS * G * u.length_unit, rel=1e-12)
    assert u.time_unit**2 * G == pytest.approx(u.length_unit, rel=1e-12)


def test_drop_height_in_scaled_units(cs_params):
    assert to_scaled(0.0, "length", cs_params) == 0.0
    assert to_scaled(cs_params.units.length_unit, "length", cs_params) == pytest.approx(1.0)
    assert to_scaled(20.1e-6, "length", cs_params) == pytest.approx(70.3, abs=0.1)


@pytest.mark.parametrize("kind", KINDS)
def test_unit_round_trip(cs_params, kind):
    for value in (1e-9, 3.7, -2.5e4):
        back = to_scaled(from_scaled(value, kind, cs_params), kind, cs_params)
        assert back == pytest.approx(value, rel=1e-14)


def test_unknown_kind_rejected(cs_params):
    with pytest.raises(ValueError):
        to_scaled(1.0, "charge", cs_params)


@pytest.mark.parametrize("field", ["mass", "V0", "kappa", "gravity", "hbar"])
def test_params_must_be_positive(field):
    kwargs = dict(mass=CS_MASS, V0=1e-27, kappa=1e6, gravity=G, hbar=HBAR)
    kwargs[field] = 0.0
    with pytest.raises(ValueError):
        PhysicalParams(**kwargs)


def test_turning_point_check(cs_params):
    cs_params.check_turning_point(CS_MASS * G * 20.1e-6)
    with pytest.raises(ValueError):
        cs_params.check_turning_point(2 * cs_params.V0)


def test_impact_speed():
    p = PhysicalParams.preset("cs")
    assert impact_speed_from_drop(0.0, p) == 0.0
    assert impact_speed_from_drop(20.1e-6, p) == pytest.approx(0.0198, abs=1e-4)
    assert impact_speed_from_drop(4e-6, p) == pytest.approx(2 * impact_speed_from_drop(1e-6, p), rel=1e-14)


def _validity(gamma=2 * math.pi * 5.2e6, delta=2 * math.pi * 1e9, v=0.0198, omega_max=None):
    return ValidityParams(gamma=gamma, delta=delta, v_z=v, omega_max=omega_max)


def test_spontaneous_emission_cs_value(cs_params):
    v = _validity()
    expected = v.gamma * CS_MASS * v.v_z / (HBAR * v.delta * cs_params.kappa)
    p = spontaneous_emission_probability(v, cs_params.kappa, cs_params)
    assert p == expected
    assert p == pytest.approx(0.12, abs=0.01)


def test_spontaneous_emission_zero_decay(cs_params):
    assert spontaneous_emission_probability(_validity(gamma=0.0), cs_params.kappa, cs_params) == 0.0


def test_light_shift_elimination_agrees(cs_params):
    v = _validity()
    omega = rabi_from_light_shift(v, cs_params)
    explicit = spontaneous_emission_probability(_validity(omega_max=omega), cs_params.kappa, cs_params)
    eliminated = spontaneous_emission_probability(v, cs_params.kappa, cs_params)
    assert explicit == pytest.approx(eliminated, rel=1e-13)


def test_validity_params_reject_bad_input():
    with pytest.raises(ValueError):
        _validity(delta=0.0)
    with pytest.raises(ValueError):
        _validity(v=0.0)


def test_flag_warns_above_threshold(cs_params):
    with pytest.warns(ValidityWarning):
        p, flagged = check_spontaneous_emission(_validity(), cs_params.kappa, cs_params, threshold=0.1)
    assert flagged and p > 0.1
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        _, flagged = check_spontaneous_emission(_validity(), cs_params.kappa, cs_params, threshold=0.5)
    assert not flagged


@settings(max_examples=50, deadline=None)
@given(st.floats(1e6, 1e11), st.floats(1.01, 10.0), st.floats(1e5, 1e8))
def test_emission_monotone_in_detuning_and_decay(delta, factor, gamma):
    p = PhysicalParams.preset("cs")
    base = spontaneous_emission_probability(_validity(gamma=gamma, delta=delta), p.kappa, p)
    more_detuned = spontaneous_emission_probability(_validity(gamma=gamma, delta=delta * factor), p.kappa, p)
    faster_decay = spontaneous_emission_probability(_validity(gamma=gamma * factor, delta=delta), p.kappa, p)
    assert more_detuned < base < faster_decay


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-27, 1e-24), st.floats(1.0, 30.0))
def test_scaled_units_consistent_for_any_atom(mass, g):
    u = ScaledUnits.from_params(PhysicalParams(mass=mass, V0=1.0, kappa=1.0, gravity=g))
    assert u.energy_unit == pytest.approx(mass * g * u.length_unit, rel=1e-12)
    assert u.time_unit**2 * g == pytest.approx(u.length_unit, rel=1e-12)
