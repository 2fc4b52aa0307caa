"""The ten acceptance criteria, one test each, at their stated tolerances.

Every test records a PASS/FAIL line (printed in the terminal summary and to
stdout) before asserting, so a full run lists all ten verdicts.
"""
import math
import os
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import airy_zeros_oracle
from rtm import inversion
from rtm.airy import airy_zero
from rtm.config import config_from_dict
from rtm.physics import (PhysicalParams, ValidityParams, from_scaled, rabi_from_light_shift,
                         spontaneous_emission_probability, to_scaled)
from rtm.propagator import PotentialModel, PropagationError, cross_validate, default_grid, evolve, max_stable_dt
from rtm.revival import detect_classical_period, detect_revival
from rtm.scan import SurfaceProfile, run_dynamic_scan, run_static_scan
from rtm.spectrum import bounce_period, classical_period, recurrence_time, revival_time_closed_form
from rtm.wavepacket import analytic_autocorrelation, make_gaussian

CS_DROP = 20.1e-6
CS_WIDTH = 0.28e-6
PAPER_N0 = 176.16


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((number, bool(passed), detail))
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def cs():
    return PhysicalParams.preset("cs")


@pytest.fixture(scope="module")
def cs_scaled(cs):
    return float(to_scaled(CS_DROP, "length", cs)), float(to_scaled(CS_WIDTH, "length", cs))


@pytest.fixture(scope="module")
def cs_signal(cs_coeffs, spectrum400):
    """Analytic Cs autocorrelation out past the revival window, 50 samples per period."""
    n0 = cs_coeffs.n0_mean
    T1 = classical_period(n0, spectrum400)
    T2 = float(revival_time_closed_form(spectrum400.energy_at(n0)))
    times = np.arange(0.0, 1.35 * T2, T1 / 50)
    return analytic_autocorrelation(cs_coeffs, spectrum400, times), T1, T2


# 1 ----------------------------------------------------------------------------

def test_criterion_1_airy_zero_oracle():
    start = time.perf_counter()
    exact = np.array([airy_zero(n) for n in range(1, 101)])
    oracle = airy_zeros_oracle(100)
    asym = np.array([airy_zero(n, "asymptotic") for n in range(10, 101)])
    elapsed = time.perf_counter() - start
    abs_err = float(np.max(np.abs(exact - oracle)))
    rel_asym = float(np.max(np.abs(asym / exact[9:] - 1)))
    ok = abs_err < 1e-8 and rel_asym < 1e-6 and elapsed < 1.0
    record(1, ok, f"max |exact - oracle| = {abs_err:.2e} (< 1e-8); asymptotic n>=10 rel {rel_asym:.2e} "
                  f"(< 1e-6); {elapsed:.2f} s (< 1 s)")
    assert ok


# 2 ----------------------------------------------------------------------------

def test_criterion_2_mean_quantum_number(cs_packet, spectrum400):
    from rtm.wavepacket import project
    start = time.perf_counter()
    n0 = project(cs_packet, spectrum400).n0_mean
    elapsed = time.perf_counter() - start
    ok = abs(n0 - 176) <= 2 and elapsed < 10
    record(2, ok, f"projected n0 = {n0:.3f} (176 +- 2; quoted {PAPER_N0}); {elapsed:.1f} s")
    assert ok


# 3 ----------------------------------------------------------------------------

def test_criterion_3_classical_period(cs, cs_signal, cs_coeffs, spectrum400):
    signal, T1, _ = cs_signal
    measured = detect_classical_period(signal.window(0, 8 * T1)).value
    measured_s = float(from_scaled(measured, "time", cs))
    kinematic_s = 2 * math.sqrt(2 * CS_DROP / cs.gravity)
    E0 = spectrum400.energy_at(cs_coeffs.n0_mean)
    derivative = recurrence_time(1, cs_coeffs.n0_mean, spectrum400)
    closed = float(bounce_period(E0))
    err_peaks = abs(measured_s / kinematic_s - 1)
    err_forms = abs(derivative / closed - 1)
    ok = err_peaks < 0.02 and err_forms < 0.01
    record(3, ok, f"peak spacing {measured_s * 1e3:.4f} ms vs 2 sqrt(2 z0/g) = {kinematic_s * 1e3:.4f} ms "
                  f"({err_peaks:.2%} < 2%); derivative vs kinematic form {err_forms:.2e} (< 1%)")
    assert ok


# 4 ----------------------------------------------------------------------------

def test_criterion_4_revival_time(cs, cs_signal, spectrum400):
    signal, T1, T2 = cs_signal
    est = detect_revival(signal, T2, classical_period=T1)
    err_detect = abs(est.value / T2 - 1)
    E_paper = spectrum400.energy_at(PAPER_N0)
    derivative = recurrence_time(2, PAPER_N0, spectrum400)
    closed = float(revival_time_closed_form(E_paper))
    err_forms = abs(derivative / closed - 1)
    ok = err_detect < 0.05 and err_forms < 0.02
    record(4, ok, f"detected T2 = {float(from_scaled(est.value, 'time', cs)):.4f} s vs closed form "
                  f"{float(from_scaled(T2, 'time', cs)):.4f} s ({err_detect:.2%} < 5%); derivative vs closed "
                  f"form at n0={PAPER_N0}: {err_forms:.2%} (< 2%)")
    assert ok


# 5 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_5_engine_equivalence(cs_scaled, spectrum400):
    z0, width = cs_scaled
    t_final = 3 * 2 * math.sqrt(2 * z0)
    deviations, aborted = {}, {}
    for kappa in (10.0, 30.0, 100.0):
        potential = PotentialModel(V0=100 * z0, kappa=kappa)
        packet = make_gaussian(z0, width, default_grid(z0, kappa, 8192))
        try:
            deviations[kappa] = cross_validate(packet, potential, spectrum400, t_final, sample_stride=20)
        except PropagationError as exc:  # an aborted grid run is a failed comparison
            deviations[kappa] = math.inf
            aborted[kappa] = f"{type(exc).__name__}: {exc}"
    values = [deviations[k] for k in (10.0, 30.0, 100.0)]
    ok = values[2] < 1e-2 and values[0] > values[1] > values[2]
    record(5, ok, "max ||C|^2 grid - analytic| over 3 periods: "
                  + ", ".join(f"kappa={k:g}: " + (aborted[k] if k in aborted else f"{v:.3g}")
                              for k, v in deviations.items())
                  + " (< 1e-2 at kappa=100, monotone)")
    assert ok


# 6 ----------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_6_unitarity_and_convergence(cs, cs_scaled):
    z0, width = cs_scaled
    kappa = float(to_scaled(cs.kappa, "wavevector", cs))
    potential = PotentialModel(V0=float(to_scaled(cs.V0, "energy", cs)), kappa=kappa)
    packet = make_gaussian(z0, width, default_grid(z0, kappa, 4096))
    T1 = 2 * math.sqrt(2 * z0)
    run = evolve(packet, potential, 5 * T1, sample_stride=200)
    n = math.ceil(T1 / max_stable_dt(packet, potential))
    obs = []
    for f in (1, 2, 4):
        r = evolve(packet, potential, T1, dt=T1 / (n * f), sample_stride=n * f)
        obs.append(r.autocorr.values[-1])
    factor = abs(obs[0] - obs[1]) / abs(obs[1] - obs[2])
    ok = run.norm_drift < 1e-9 and run.energy_drift < 1e-6 and 3.4 <= factor <= 4.6
    record(6, ok, f"norm drift {run.norm_drift:.2e} (< 1e-9), energy drift {run.energy_drift:.2e} (< 1e-6) "
                  f"over 5 periods; dt-halving factor on C(T1) {factor:.4f} (in [3.4, 4.6])")
    assert ok


# 7 ----------------------------------------------------------------------------

def test_criterion_7_static_round_trip():
    cfg = config_from_dict({})
    x = np.arange(8) * 1e-6
    step = SurfaceProfile(x, np.where(x >= 4e-6, 100e-9, 0.0))
    flat = SurfaceProfile(x[:4], np.zeros(4))
    rec = run_static_scan(step, cfg, jobs=4).reconstructed.h
    flat_rec = run_static_scan(flat, cfg, jobs=4).reconstructed.h
    amplitude = float(np.mean(rec[4:]) - np.mean(rec[:4]))
    location = float(x[int(np.argmax(np.diff(rec))) + 1])
    flat_max = float(np.max(np.abs(flat_rec)))
    ok = abs(amplitude / 100e-9 - 1) < 0.05 and location == 4e-6 and flat_max < 2e-9
    record(7, ok, f"step {amplitude * 1e9:.2f} nm (100 nm +- 5%) at x = {location * 1e6:g} um (4 um); "
                  f"flat max |h| = {flat_max * 1e9:.3f} nm (< 2 nm)")
    assert ok


# 8 ----------------------------------------------------------------------------

def _round_trip_tuples(E):
    """50 (a, r, omega) tuples in the valid regime (1 - r)^2 > a_tilde^2."""
    tuples = []
    for r in (0.15, 0.3, 0.45, 0.6, 0.75):
        for frac in (0.2, 0.5, 0.8):
            for a_frac in (0.005, 0.02, 0.05):
                a_tilde = frac * (1 - r)
                tuples.append((a_frac * E, r, 4 * E * a_tilde / r**2))
    tuples += [(0.01 * E, 0.2 + 0.05 * i, 4 * E * 0.4 * (0.8 - 0.05 * i) / (0.2 + 0.05 * i) ** 2)
               for i in range(5)]
    return tuples


def test_criterion_8_dynamic_algebraic_round_trip():
    E, T2 = 70.0, 25000.0
    worst_a = worst_w = worst_res = 0.0
    failures = 0
    for a, r, omega in _round_trip_tuples(E):
        ctx_true = inversion.ModulationContext.from_ratio(E, r, r * r * omega / (4 * E))
        assert ctx_true.in_valid_regime
        Tl = inversion.modulated_revival_time(ctx_true, a, T2)
        ctx = inversion.ModulationContext.from_ratio(E, r)  # frequency unknown
        try:
            a_rec = inversion.amplitude_from_times(T2, Tl, ctx)
            sol = inversion.frequency_from_times(T2, Tl, a_rec, ctx)
        except inversion.InversionError:
            failures += 1
            continue
        worst_a = max(worst_a, abs(a_rec / a - 1))
        worst_w = max(worst_w, abs(sol.omega / omega - 1))
        worst_res = max(worst_res, max(abs(v) for v in sol.residuals))
    n = len(_round_trip_tuples(E))
    ok = n == 50 and failures == 0 and worst_a < 1e-8 and worst_w < 1e-8 and worst_res < 1e-10
    record(8, ok, f"{n} tuples: worst rel error a {worst_a:.3g}, omega {worst_w:.3g} (both < 1e-8); "
                  f"max root residual {worst_res:.2e} (< 1e-10); {failures} inversion errors")
    assert ok


# 9 ----------------------------------------------------------------------------

AMPLITUDES = (11.4e-9, 23e-9, 46e-9)


def _dynamic_config(cs, z0_scaled, omega_si, grid_size, dt_scaled, accuracy, r=None, z_max_factor=5.0):
    L, T = cs.units.unit("length"), cs.units.unit("time")
    speed = omega_si * 1e-9 / (2 * math.pi)  # 1 nm structure spacing
    modulation = {"r": r} if r is not None else {}
    propagation = {"dt": dt_scaled * T, "accuracy": accuracy} if dt_scaled else {}
    return config_from_dict({
        "packet": {"drop_height": z0_scaled * L, "width": CS_WIDTH},
        "grid": {"size": grid_size, "z_max": z_max_factor * z0_scaled * L},
        "propagation": propagation,
        "modulation": modulation,
        "scan": {"scan_speed": speed, "mode": "dynamic"},
    }), speed


def _run_dynamic_fixture(cfg, omega_si):
    spacing = 1e-9
    x = np.arange(64) * spacing / 8
    rows = []
    for a in AMPLITUDES:
        try:
            d = run_dynamic_scan(SurfaceProfile(x, a * np.sin(2 * np.pi * x / spacing)), cfg).dynamic_extras
            rows.append((a, d, None))
        except Exception as exc:  # a numerical abort is a failed criterion, reported as such
            rows.append((a, None, f"{type(exc).__name__}: {exc}"))
    return rows


def _judge_dynamic(rows, omega_si):
    parts, ok, shifts = [], True, []
    for a, d, err in rows:
        if d is None:
            parts.append(f"a={a * 1e9:g} nm: aborted ({err})")
            ok = False
            continue
        shift = d.T2_static.value - d.T2_modulated.value
        shifts.append(shift)
        a_err = abs(d.amplitude.value / a - 1) if math.isfinite(d.amplitude.value) else math.inf
        w_err = abs(d.omega.value / omega_si - 1) if math.isfinite(d.omega.value) else math.inf
        s_err = abs(d.spacing.value / 1e-9 - 1) if d.spacing is not None else math.inf
        ok &= a_err < 0.10 and w_err < 0.15 and s_err < 0.15 and d.error is None
        parts.append(f"a={a * 1e9:g} nm: recovered {d.amplitude.value * 1e9:.4g} nm ({a_err:.1%}), "
                     f"omega {d.omega.value:.4g} rad/s ({w_err:.1%}), spacing "
                     f"{'n/a' if d.spacing is None else f'{d.spacing.value * 1e9:.3g} nm'}, "
                     f"T2 shift {shift:.3g} s" + (f" [{d.error}]" if d.error else ""))
    increasing = len(shifts) == len(AMPLITUDES) and all(b > a for a, b in zip(shifts, shifts[1:]))
    ok &= increasing
    return ok, "; ".join(parts) + f"; shift increasing in a: {increasing}"


@pytest.mark.slow
def test_criterion_9_dynamic_end_to_end_reduced_fixture(cs):
    """Reduced fixture: n0 ~ 40 with the Cs a*kappa and omega/spacing ratio (CI budget < 10 min)."""
    start = time.perf_counter()
    z0 = 26.0  # scaled drop height: n0 = 40.4
    T = cs.units.unit("time")
    omega_si = 1.7615158 / T  # 4.054 level spacings, the Cs ratio for 2 pi x 1 kHz
    cfg, _ = _dynamic_config(cs, z0, omega_si, grid_size=1024, dt_scaled=0.005, accuracy=0.2, r=0.2492)
    rows = _run_dynamic_fixture(cfg, omega_si)
    elapsed = time.perf_counter() - start
    ok, detail = _judge_dynamic(rows, omega_si)
    ok &= elapsed < 600
    record(9, ok, f"[reduced n0~40, {elapsed:.0f} s] " + detail)
    assert ok


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("RTM_NIGHTLY") != "1", reason="full Cs dynamic fixture runs nightly (RTM_NIGHTLY=1)")
def test_criterion_9_dynamic_end_to_end_cs(cs, cs_scaled):
    z0, _ = cs_scaled
    omega_si = 2 * math.pi * 1e3
    cfg, _ = _dynamic_config(cs, z0, omega_si, grid_size=4096, dt_scaled=None, accuracy=None)
    ok, detail = _judge_dynamic(_run_dynamic_fixture(cfg, omega_si), omega_si)
    record(9, ok, "[full Cs] " + detail)
    assert ok


# 10 ---------------------------------------------------------------------------

def test_criterion_10_spontaneous_emission(cs):
    kappa = cs.kappa
    v_z = math.sqrt(2 * cs.gravity * CS_DROP)
    gamma = 2 * math.pi * 5.2e6
    base = ValidityParams(gamma=gamma, delta=2 * math.pi * 1e9, v_z=v_z)
    closed = gamma * cs.mass * v_z / (cs.hbar * base.delta * kappa)
    explicit = ValidityParams(gamma, base.delta, v_z, omega_max=rabi_from_light_shift(base, cs))
    p_explicit = spontaneous_emission_probability(explicit, kappa, cs)
    rel = abs(p_explicit / closed - 1)
    deltas = np.linspace(2 * math.pi * 0.1e9, 2 * math.pi * 10e9, 100)
    sweep = [spontaneous_emission_probability(ValidityParams(gamma, d, v_z), kappa, cs) for d in deltas]
    monotone = bool(np.all(np.diff(sweep) < 0))
    ok = rel < 1e-12 and monotone
    record(10, ok, f"P with light-shift Omega_max = {p_explicit:.6g} vs closed form {closed:.6g} "
                   f"(rel {rel:.1e}); strictly decreasing over 100 detunings: {monotone}")
    assert ok
