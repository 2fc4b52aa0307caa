"""Virtual microscope: scan a surface profile point by point and reconstruct it.

Static mode treats every lateral position as an independent drop onto a
mirror raised by the local surface height h(x): the packet falls from
H_ref - h, the revival time of its autocorrelation is measured, and the
inverted energy gives the height.  The first scan point defines h = 0.

Dynamic mode reads a periodic profile as a sinusoidally oscillating mirror
(amplitude a, angular frequency 2 pi v / period for scan speed v) and recovers
(a, omega, spacing) from the revival-time shift against a static reference run.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from . import inversion
from .config import RunConfig
from .physics import (ValidityWarning, check_spontaneous_emission, from_scaled, impact_speed_from_drop,
                      to_scaled)
from .propagator import PotentialModel, PropagationError, default_grid, evolve, max_stable_dt
from .revival import Estimate, RevivalDetectionError, detect_classical_period, detect_revival
from .spectrum import Spectrum, classical_period, revival_time_closed_form
from .wavepacket import Grid, InsufficientBasisError, analytic_autocorrelation, make_gaussian, project

log = logging.getLogger(__name__)

#: Profiles must keep |h| below this fraction of the reference drop height.
MAX_HEIGHT_FRACTION = 0.1
#: Minimum mean quantum number for the semiclassical revival formulas.
MIN_QUANTUM_NUMBER = 20
#: A periodic profile needs its dominant Fourier line this many times above the rest.
PERIODICITY_RATIO = 10.0
#: Extra time recorded beyond the revival search window (fraction of T2).
WINDOW_MARGIN = 0.01
#: Significant digits of every float written to a report.
REPORT_DIGITS = 12


class ProfileError(ValueError):
    """Malformed or out-of-range surface profile."""


class ModeMismatchError(ProfileError):
    """A non-periodic profile was handed to the dynamic mode."""


class ScanAbortedError(RuntimeError):
    """Too many scan points failed."""


@dataclass(frozen=True, eq=False)
class SurfaceProfile:
    """Heights h(x) along a lateral line scan [m]."""

    x: np.ndarray
    h: np.ndarray
    name: str = "profile"
    units: str = "m"
    #: reconstructed profiles mark failed points with NaN heights
    allow_missing: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if x.ndim != 1 or x.shape != h.shape:
            raise ProfileError("x and h must be 1-d arrays of equal length")
        if not np.all(np.isfinite(x)):
            raise ProfileError("profile contains non-finite positions")
        finite_h = np.isfinite(h) | (self.allow_missing & np.isnan(h))
        if not np.all(finite_h):
            raise ProfileError("profile contains non-finite heights")
        if np.any(np.diff(x) <= 0):
            bad = int(np.flatnonzero(np.diff(x) <= 0)[0]) + 1
            raise ProfileError(f"x must be strictly increasing (sample {bad}: x={x[bad]!r})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)

    def __len__(self) -> int:
        return self.x.size

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.h.tolist()))

    def check_heights(self, reference_height: float) -> None:
        limit = MAX_HEIGHT_FRACTION * reference_height
        big = np.flatnonzero(np.abs(self.h) >= limit)
        if big.size:
            i = int(big[0])
            raise ProfileError(f"height {self.h[i]:.6g} m at x={self.x[i]:.6g} m is not small compared with "
                               f"the drop height (limit {limit:.6g} m)")


def load_profile(path, reference_height: Optional[float] = None) -> SurfaceProfile:
    """Parse a two-column CSV with header ``x_m,h_m``; '#' starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ProfileError(f"cannot read profile {path}: {exc}") from exc
    header_seen = False
    xs, hs, line_of = [], [], []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cells = [c.strip() for c in line.split(",")]
        if not header_seen:
            if cells != ["x_m", "h_m"]:
                raise ProfileError(f"{path}:{lineno}: expected header 'x_m,h_m', got {line!r}")
            header_seen = True
            continue
        if len(cells) != 2:
            raise ProfileError(f"{path}:{lineno}: expected 2 columns, got {len(cells)}")
        try:
            x, h = float(cells[0]), float(cells[1])
        except ValueError:
            raise ProfileError(f"{path}:{lineno}: cannot parse numbers from {line!r}") from None
        if not (math.isfinite(x) and math.isfinite(h)):
            raise ProfileError(f"{path}:{lineno}: non-finite value")
        if xs and x == xs[-1]:
            raise ProfileError(f"{path}:{lineno}: duplicate x={x!r}")
        if xs and x < xs[-1]:
            raise ProfileError(f"{path}:{lineno}: x={x!r} is not increasing (previous {xs[-1]!r})")
        xs.append(x)
        hs.append(h)
        line_of.append(lineno)
    if not header_seen:
        raise ProfileError(f"{path}: missing header 'x_m,h_m'")
    profile = SurfaceProfile(np.array(xs), np.array(hs), name=path.stem)
    if reference_height is not None:
        limit = MAX_HEIGHT_FRACTION * reference_height
        for x_line, h in zip(line_of, hs):
            if abs(h) >= limit:
                raise ProfileError(f"{path}:{x_line}: height {h!r} m exceeds {limit:.6g} m "
                                   "(10% of the reference drop height)")
    return profile


@dataclass(frozen=True)
class PointResult:
    x: float
    h_true: float
    T2: float = math.nan
    T2_uncertainty: float = math.nan
    energy: float = math.nan
    h: float = math.nan
    p_sp: Optional[float] = None
    flagged: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class DynamicExtras:
    amplitude: Estimate
    omega: Estimate
    spacing: Optional[Estimate]
    T2_static: Estimate
    T2_modulated: Estimate
    true_amplitude: float
    true_omega: float
    alpha_T: float = math.nan
    roots: list = field(default_factory=list)
    error: Optional[str] = None


@dataclass(frozen=True)
class ScanResult:
    mode: str
    engine: str
    reconstructed: SurfaceProfile
    per_point: list
    dynamic_extras: Optional[DynamicExtras] = None

    def __post_init__(self):
        if len(self.per_point) != len(self.reconstructed):
            raise ValueError("per-point results must align with the reconstructed profile")


# --------------------------------------------------------------------------- measurement

@lru_cache(maxsize=4)
def _spectrum(n_max: int) -> Spectrum:
    return Spectrum.triangular(n_max)


@dataclass(frozen=True)
class Measurement:
    revival: Estimate
    classical_period: float
    predicted_T2: float
    n0: float


def measure_revival(config: RunConfig, drop_height: float, engine: str = "analytic",
                    amplitude: float = 0.0, omega: float = 0.0) -> Measurement:
    """Revival time [scaled] of a packet released ``drop_height`` [m] above the mirror plane.

    ``amplitude`` [m] and ``omega`` [rad/s] set a modulated mirror (grid engine only).
    """
    params = config.physical_params(drop_height=config.reference_height)
    z0 = float(to_scaled(drop_height, "length", params))
    width = float(to_scaled(config.packet.width, "length", params))
    momentum = float(to_scaled(config.packet.mean_momentum, "momentum", params))
    spectrum = _spectrum(config.spectrum.n_max)
    predicted = float(revival_time_closed_form(z0))
    t_end = predicted * (1.0 + config.revival.window_frac + WINDOW_MARGIN)
    if engine == "analytic":
        if amplitude:
            raise ValueError("a modulated mirror needs the grid engine")
        coeffs = project(make_gaussian(z0, width, mean_momentum=momentum), spectrum)
        if coeffs.n0_mean < MIN_QUANTUM_NUMBER:
            raise ValueError(f"mean quantum number {coeffs.n0_mean:.4g} is below {MIN_QUANTUM_NUMBER}")
        period = classical_period(coeffs.n0_mean, spectrum)
        times = np.arange(0.0, t_end, period / config.revival.samples_per_period)
        signal = analytic_autocorrelation(coeffs, spectrum, times)
        n0 = coeffs.n0_mean
    elif engine == "grid":
        signal, period, n0 = _grid_signal(config, params, z0, width, momentum, t_end, amplitude, omega)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    estimate = detect_revival(signal, predicted, config.revival.window_frac, classical_period=period)
    return Measurement(estimate, period, predicted, n0)


def _grid_signal(config: RunConfig, params, z0, width, momentum, t_end, amplitude, omega):
    kappa = float(to_scaled(params.kappa, "wavevector", params))
    V0 = float(to_scaled(params.V0, "energy", params))
    a = float(to_scaled(amplitude, "length", params))
    w = float(to_scaled(omega, "frequency", params))
    size = config.grid.size
    if config.grid.z_min is not None or config.grid.z_max is not None:
        lo = to_scaled(config.grid.z_min, "length", params) if config.grid.z_min is not None else -10.0 / kappa
        hi = to_scaled(config.grid.z_max, "length", params) if config.grid.z_max is not None else 2.5 * z0
        grid = Grid.spanning(float(lo), float(hi), size)
    else:
        grid = default_grid(z0, kappa, size)
    packet = make_gaussian(z0, width, grid, mean_momentum=momentum)
    potential = PotentialModel(V0, kappa, a, w)
    period = 2.0 * math.sqrt(2.0 * z0)  # bounce period, refined below from the signal
    dt = to_scaled(config.propagation.dt, "time", params) if config.propagation.dt else None
    accuracy = config.propagation.accuracy
    step = dt or max_stable_dt(packet, potential, accuracy)
    stride = max(1, int(period / config.revival.samples_per_period / step))
    if dt is not None:
        t_end = math.ceil(t_end / dt) * dt  # a whole number of steps
    result = evolve(packet, potential, t_end, dt=dt, sample_stride=stride, accuracy=accuracy)
    signal = result.autocorr
    try:
        period = detect_classical_period(signal.window(0.0, 6.0 * period)).value
    except RevivalDetectionError:
        pass
    return signal, period, math.nan


def _impact_check(config: RunConfig, drop_height: float):
    if config.validity is None:
        return None, False
    params = config.physical_params(drop_height=config.reference_height)
    v = config.validity_params(impact_speed_from_drop(drop_height, params))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        return check_spontaneous_emission(v, params.kappa, params, config.validity.threshold)


def _static_point(config: RunConfig, engine: str, x: float, h: float):
    """One drop-and-measure experiment; returns (x, h, T2 estimate, error)."""
    drop = config.reference_height - h
    try:
        m = measure_revival(config, drop, engine)
        return x, h, m.revival, None
    except (RevivalDetectionError, PropagationError, InsufficientBasisError, ArithmeticError, ValueError) as exc:
        log.warning("scan point x=%.6g m failed: %s", x, exc)
        return x, h, None, f"{type(exc).__name__}: {exc}"


def _static_point_star(args):
    return _static_point(*args)


def run_static_scan(profile: SurfaceProfile, config: RunConfig, engine: Optional[str] = None,
                    jobs: Optional[int] = None) -> ScanResult:
    """Measure every point independently and reconstruct heights relative to the first point."""
    engine = engine or config.scan.engine or "analytic"
    jobs = jobs or config.scan.jobs
    H = config.reference_height
    profile.check_heights(H)
    params = config.physical_params(drop_height=H)
    tasks = [(config, engine, float(x), float(h)) for x, h in zip(profile.x, profile.h)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            raw = list(pool.map(_static_point_star, tasks))
    else:
        raw = [_static_point(*t) for t in tasks]

    failures = sum(1 for r in raw if r[2] is None)
    if len(raw) and failures > config.scan.failure_limit * len(raw):
        first = next(r[3] for r in raw if r[2] is None)
        raise ScanAbortedError(f"{failures} of {len(raw)} scan points failed (first: {first})")
    if raw and raw[0][2] is None:
        raise ScanAbortedError(f"the calibration point x={raw[0][0]:.6g} failed: {raw[0][3]}")

    H_scaled = float(to_scaled(H, "length", params))
    tol = config.scan.calibration_tolerance
    tol_scaled = None if tol is None else float(to_scaled(tol * params.mass * params.gravity, "energy", params))
    points = []
    offset = None
    for x, h_true, est, err in raw:
        p_sp, flagged = _impact_check(config, H - h_true)
        if est is None:
            points.append(PointResult(x, h_true, p_sp=p_sp, flagged=flagged, error=err))
            continue
        energy = inversion.energy_from_revival(est.value)
        try:
            h_abs = inversion.height_from_energy(energy, H_scaled, tolerance=tol_scaled)
        except inversion.CalibrationError as exc:
            points.append(PointResult(x, h_true, est.value, est.uncertainty, energy,
                                      p_sp=p_sp, flagged=flagged, error=f"CalibrationError: {exc}"))
            continue
        if offset is None:
            offset = h_abs
        h_rec = float(from_scaled(h_abs - offset, "length", params))
        points.append(PointResult(
            x, h_true,
            T2=float(from_scaled(est.value, "time", params)),
            T2_uncertainty=float(from_scaled(est.uncertainty, "time", params)),
            energy=float(from_scaled(energy, "energy", params)),
            h=h_rec, p_sp=p_sp, flagged=flagged))
    reconstructed = SurfaceProfile(profile.x, np.array([p.h for p in points]),
                                   name=f"{profile.name}-reconstructed", allow_missing=True)
    return ScanResult("static", engine, reconstructed, points)


# --------------------------------------------------------------------------- dynamic mode

@dataclass(frozen=True)
class Periodicity:
    amplitude: float
    period: float
    phase: float
    ratio: float


def analyse_periodicity(profile: SurfaceProfile) -> Periodicity:
    """Dominant sinusoid of a uniformly sampled profile, from its discrete Fourier transform.

    The profile's mean is removed first.  An identically flat profile has
    amplitude 0 and an undefined (NaN) period.
    """
    x, h = profile.x, profile.h
    if x.size < 4:
        raise ModeMismatchError("a periodic profile needs at least 4 samples")
    dx = np.diff(x)
    if not np.allclose(dx, dx[0], rtol=1e-6, atol=0.0):
        raise ModeMismatchError("dynamic mode needs a uniformly sampled profile")
    y = h - h.mean()
    if not np.any(y):
        return Periodicity(0.0, math.nan, 0.0, math.inf)
    spectrum = np.fft.rfft(y)
    mags = np.abs(spectrum)
    mags[0] = 0.0
    k = int(np.argmax(mags))
    rest = np.delete(mags[1:], k - 1)
    ratio = math.inf if rest.size == 0 or rest.max() == 0 else float(mags[k] / rest.max())
    if ratio < PERIODICITY_RATIO:
        raise ModeMismatchError(
            f"profile is not periodic (dominant Fourier line only {ratio:.3g}x the next); use static mode")
    n = x.size
    scale = 1.0 if (n % 2 == 0 and k == n // 2) else 2.0
    amplitude = scale * mags[k] / n
    period = n * dx[0] / k
    phase = float(np.angle(spectrum[k]))
    return Periodicity(float(amplitude), float(period), phase, ratio)


def run_dynamic_scan(profile: SurfaceProfile, config: RunConfig, engine: Optional[str] = None) -> ScanResult:
    """Modulated-mirror run against a static reference, inverted for (a, omega, spacing)."""
    engine = engine or config.scan.engine or "grid"
    if engine != "grid":
        raise ValueError("dynamic mode needs the grid engine (time-dependent mirror)")
    H = config.reference_height
    profile.check_heights(H)
    period_info = analyse_periodicity(profile)
    speed = config.scan.scan_speed
    a_true = period_info.amplitude
    omega_true = 2.0 * math.pi * speed / period_info.period if a_true > 0 else config.modulation.omega
    params = config.physical_params(drop_height=H)
    hbar_s = 1.0

    log.info("dynamic scan: a=%.4g m, omega=%.6g rad/s (ratio %.3g)", a_true, omega_true, period_info.ratio)
    static = _static_reference(config)
    if a_true > 0:
        modulated = measure_revival(config, H, "grid", amplitude=a_true, omega=omega_true)
    else:
        modulated = static
    T2s, T2m = static.revival, modulated.revival
    E = inversion.energy_from_revival(T2s.value)
    error = None
    amp = omega = spacing = None
    alpha, roots = math.nan, []
    try:
        ctx = _modulation_context(config, E, omega_true, params)
        if a_true == 0 and T2m.value == T2s.value:
            amp, omega = Estimate(0.0, 0.0), Estimate(math.nan, math.nan)
        else:
            res = inversion.invert_dynamic(T2s, T2m, ctx, scan_speed=float(to_scaled(speed, "velocity", params)),
                                           hbar=hbar_s)
            amp, omega, spacing = res.amplitude, res.frequency, res.spacing
            alpha, roots = res.alpha_T, res.roots_found
    except inversion.InversionError as exc:
        error = f"{type(exc).__name__}: {exc}"

    def si(est, kind):
        if est is None:
            return None
        return Estimate(float(from_scaled(est.value, kind, params)), float(from_scaled(est.uncertainty, kind, params)))

    extras = DynamicExtras(
        amplitude=si(amp, "length") or Estimate(math.nan, math.nan),
        omega=si(omega, "frequency") or Estimate(math.nan, math.nan),
        spacing=si(spacing, "length"),
        T2_static=si(T2s, "time"), T2_modulated=si(T2m, "time"),
        true_amplitude=a_true, true_omega=omega_true, alpha_T=alpha, roots=list(roots), error=error)

    # reconstructed profile: the recovered sinusoid; its lateral phase is not
    # measurable and is borrowed from the input profile
    if extras.spacing is not None and math.isfinite(extras.amplitude.value):
        k_rec = 2.0 * math.pi / extras.spacing.value
        h_rec = profile.h.mean() + extras.amplitude.value * np.cos(k_rec * (profile.x - profile.x[0])
                                                                   + period_info.phase)
    elif amp is not None:
        h_rec = np.full(profile.x.shape, profile.h.mean() + extras.amplitude.value)
    else:
        h_rec = np.full(profile.x.shape, math.nan)
    T2m_si = extras.T2_modulated
    points = [PointResult(float(x), float(h), T2m_si.value, T2m_si.uncertainty,
                          float(from_scaled(E, "energy", params)), float(hr), error=error)
              for x, h, hr in zip(profile.x, profile.h, h_rec)]
    reconstructed = SurfaceProfile(profile.x, h_rec, name=f"{profile.name}-reconstructed", allow_missing=True)
    return ScanResult("dynamic", engine, reconstructed, points, extras)


_STATIC_REFERENCES: dict[str, Measurement] = {}


def _static_reference(config: RunConfig) -> Measurement:
    """Unmodulated grid run at the reference height, reused by dynamic scans sharing the configuration."""
    state = dict(config.to_dict())
    for section in ("modulation", "scan"):  # neither affects the static run beyond the drop height
        state.pop(section)
    state["reference_height"] = config.reference_height
    key = json.dumps(state, sort_keys=True, default=str)
    if key not in _STATIC_REFERENCES:
        _STATIC_REFERENCES[key] = measure_revival(config, config.reference_height, "grid")
    return _STATIC_REFERENCES[key]


def _modulation_context(config: RunConfig, E: float, omega_true: float, params) -> inversion.ModulationContext:
    mod = config.modulation
    if mod.E_N is not None:
        return inversion.ModulationContext(E, float(to_scaled(mod.E_N, "energy", params)))
    if mod.r is not None:
        return inversion.ModulationContext.from_ratio(E, mod.r)
    seed = mod.omega_seed if mod.omega_seed is not None else omega_true
    spectrum = _spectrum(config.spectrum.n_max)
    E_N = inversion.resonant_energy(float(to_scaled(seed, "frequency", params)), spectrum)
    return inversion.ModulationContext(E, E_N)


def run_scan(profile: SurfaceProfile, config: RunConfig, mode: Optional[str] = None,
             engine: Optional[str] = None, jobs: Optional[int] = None) -> ScanResult:
    mode = mode or config.scan.mode
    if mode == "static":
        return run_static_scan(profile, config, engine, jobs)
    if mode == "dynamic":
        return run_dynamic_scan(profile, config, engine)
    raise ValueError(f"unknown scan mode {mode!r}")


# --------------------------------------------------------------------------- reports

POINT_FIELDS = ("x_m", "h_true_m", "h_reconstructed_m", "T2_s", "T2_uncertainty_s", "energy_J",
                "p_sp", "flagged", "status")


def _fmt(value) -> Optional[float]:
    """Round to REPORT_DIGITS significant digits; NaN and None become None."""
    if value is None:
        return None
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.{REPORT_DIGITS}g}")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        v = _fmt(value)
        return "" if v is None else f"{v:.{REPORT_DIGITS}g}"
    return str(value)


def _point_row(p: PointResult) -> dict:
    return {
        "x_m": p.x, "h_true_m": p.h_true, "h_reconstructed_m": p.h, "T2_s": p.T2,
        "T2_uncertainty_s": p.T2_uncertainty, "energy_J": p.energy, "p_sp": p.p_sp,
        "flagged": p.flagged, "status": "ok" if p.ok else p.error,
    }


def _estimate_dict(est: Optional[Estimate]) -> Optional[dict]:
    if est is None:
        return None
    return {"value": _fmt(est.value), "uncertainty": _fmt(est.uncertainty)}


def report_dict(result: ScanResult) -> dict:
    rows = []
    for p in result.per_point:
        row = _point_row(p)
        rows.append({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    out = {"mode": result.mode, "engine": result.engine, "points": rows}
    if result.dynamic_extras is not None:
        d = result.dynamic_extras
        out["dynamic"] = {
            "amplitude_m": _estimate_dict(d.amplitude), "omega_rad_s": _estimate_dict(d.omega),
            "spacing_m": _estimate_dict(d.spacing), "T2_static_s": _estimate_dict(d.T2_static),
            "T2_modulated_s": _estimate_dict(d.T2_modulated), "true_amplitude_m": _fmt(d.true_amplitude),
            "true_omega_rad_s": _fmt(d.true_omega), "alpha_T": _fmt(d.alpha_T),
            "roots": [_fmt(r) for r in d.roots], "error": d.error,
        }
    return out


def render_report(result: ScanResult, fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps(report_dict(result), indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POINT_FIELDS)
    for p in result.per_point:
        row = _point_row(p)
        writer.writerow([_csv_cell(row[k]) for k in POINT_FIELDS])
    return buf.getvalue()


def emit_report(result: ScanResult, path, fmt: str = "csv") -> None:
    """Write a deterministic report (stable field order, 12 significant digits)."""
    text = render_report(result, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_reconstruction(path) -> SurfaceProfile:
    """Reconstructed profile back from a CSV report."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["x_m"]) for r in rows]
    h = [float(r["h_reconstructed_m"]) if r["h_reconstructed_m"] else math.nan for r in rows]
    return SurfaceProfile(np.array(x), np.array(h), name=Path(path).stem, allow_missing=True)
