"""Command-line entry point ``rtm``.

All subcommands read one JSON configuration (``--config``, SI units; see
:mod:`rtm.config`).  Explicit flags take precedence over configuration fields,
which take precedence over built-in defaults.

Exit codes: 0 success, 2 invalid input (configuration, profile, arguments),
3 numerical failure (revival not resolved, propagation aborted, inversion
outside its regime, scan aborted).  ``RTM_LOG`` sets the log level.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import inversion
from .config import ConfigError, RunConfig, load_config
from .physics import check_spontaneous_emission, from_scaled, impact_speed_from_drop, to_scaled
from .propagator import PotentialModel, PropagationError, default_grid, evolve, max_stable_dt, save_checkpoint
from .revival import Estimate, RevivalDetectionError, analyze
from .scan import ScanAbortedError, emit_report, load_profile, render_report, run_scan
from .spectrum import Spectrum, classical_period, revival_time_closed_form
from .airy import asymptotic_zero
from .wavepacket import AutocorrSignal, InsufficientBasisError, analytic_autocorrelation, make_gaussian, project

log = logging.getLogger("rtm")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (RevivalDetectionError, PropagationError, inversion.InversionError, ScanAbortedError,
                    ArithmeticError, FloatingPointError)
INVALID_ERRORS = (ConfigError, ValueError, OSError, InsufficientBasisError)


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- output helpers

def _fmt(value):
    if isinstance(value, (bool, str)) or value is None:
        return value
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(f"{value:.12g}")


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _table(columns: Sequence[str], rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: _fmt(v) for c, v in zip(columns, row)} for row in rows], indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if _fmt(v) is None else f"{_fmt(v):.12g}" if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buf.getvalue()


def _document(data: dict) -> str:
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        if isinstance(obj, (float, np.floating, int)) and not isinstance(obj, bool):
            return _fmt(obj)
        return obj
    return json.dumps(clean(data), indent=2) + "\n"


def _estimate(est: Estimate, kind: str, params) -> dict:
    return {
        "scaled": {"value": est.value, "uncertainty": est.uncertainty},
        "si": {"value": float(from_scaled(est.value, kind, params)),
               "uncertainty": float(from_scaled(est.uncertainty, kind, params))},
    }


# --------------------------------------------------------------------------- shared setup

def _setup(cfg: RunConfig, drop_height: Optional[float] = None):
    drop = cfg.packet.drop_height if drop_height is None else drop_height
    params = cfg.physical_params(drop_height=drop)
    z0 = float(to_scaled(drop, "length", params))
    width = float(to_scaled(cfg.packet.width, "length", params))
    momentum = float(to_scaled(cfg.packet.mean_momentum, "momentum", params))
    return params, z0, width, momentum


def _potential(cfg: RunConfig, params) -> PotentialModel:
    return PotentialModel(
        V0=float(to_scaled(params.V0, "energy", params)),
        kappa=float(to_scaled(params.kappa, "wavevector", params)),
        amplitude=float(to_scaled(cfg.modulation.amplitude, "length", params)),
        omega=float(to_scaled(cfg.modulation.omega, "frequency", params)),
    )


# --------------------------------------------------------------------------- subcommands

def cmd_spectrum(args, cfg: RunConfig) -> int:
    n_max = args.n_max or cfg.spectrum.n_max
    cfg = cfg if args.atom is None else _replace_atom(cfg, args.atom)
    params = cfg.physical_params()
    spectrum = Spectrum.triangular(n_max)
    e_unit = params.units.unit("energy")
    rows = [(int(n), float(z), float(asymptotic_zero(int(n))), float(e), float(e * e_unit))
            for n, z, e in zip(spectrum.levels, spectrum.zeros, spectrum.energies)]
    _write(_table(("n", "z_n_exact", "z_n_asymptotic", "E_n_scaled", "E_n_SI"), rows, args.format), args.out)
    return EXIT_OK


def _replace_atom(cfg: RunConfig, atom: str) -> RunConfig:
    out = replace(cfg, atom=atom)
    out.mass  # validate
    return out


def _time_axis(cfg: RunConfig, period: float, params, t_final_si: Optional[float]) -> np.ndarray:
    t_final = t_final_si if t_final_si is not None else cfg.propagation.t_final
    span = float(to_scaled(t_final, "time", params)) if t_final is not None else 3.0 * period
    if span < 0:
        raise UsageError("t_final must be non-negative")
    return np.arange(0.0, span * (1 + 1e-12), period / cfg.propagation.samples_per_period)


def _grid_run(cfg: RunConfig, params, z0, width, momentum, t_final: float, dt: Optional[float], stride=None):
    kappa = float(to_scaled(params.kappa, "wavevector", params))
    grid = default_grid(z0, kappa, cfg.grid.size)
    packet = make_gaussian(z0, width, grid, mean_momentum=momentum)
    potential = _potential(cfg, params)
    period = 2.0 * math.sqrt(2.0 * z0)
    if stride is None:
        step = dt or max_stable_dt(packet, potential, cfg.propagation.accuracy)
        stride = max(1, int(period / cfg.propagation.samples_per_period / step))
    return evolve(packet, potential, t_final, dt=dt, sample_stride=stride, accuracy=cfg.propagation.accuracy)


def cmd_autocorr(args, cfg: RunConfig) -> int:
    params, z0, width, momentum = _setup(cfg)
    engine = args.engine or args.mode or "analytic"
    t_unit = params.units.unit("time")
    if engine == "analytic":
        spectrum = Spectrum.triangular(cfg.spectrum.n_max)
        coeffs = project(make_gaussian(z0, width, mean_momentum=momentum), spectrum)
        times = _time_axis(cfg, classical_period(coeffs.n0_mean, spectrum), params, args.t_final)
        signal = analytic_autocorrelation(coeffs, spectrum, times)
    else:
        period = 2.0 * math.sqrt(2.0 * z0)
        times = _time_axis(cfg, period, params, args.t_final)
        dt = float(to_scaled(cfg.propagation.dt, "time", params)) if cfg.propagation.dt else None
        signal = _grid_run(cfg, params, z0, width, momentum, float(times[-1]), dt).autocorr
    rows = [(t * t_unit, t, c.real, c.imag, abs(c) ** 2) for t, c in zip(signal.times, signal.values)]
    _write(_table(("t_SI", "t_scaled", "Re C", "Im C", "|C|^2"), rows, args.format), args.out)
    return EXIT_OK


def cmd_propagate(args, cfg: RunConfig) -> int:
    params, z0, width, momentum = _setup(cfg)
    t_final_si = args.t_final if args.t_final is not None else cfg.propagation.t_final
    if t_final_si is None:
        raise UsageError("propagate needs --t-final (or propagation.t_final in the config)")
    dt_si = args.dt if args.dt is not None else cfg.propagation.dt
    t_final = float(to_scaled(t_final_si, "time", params))
    dt = float(to_scaled(dt_si, "time", params)) if dt_si else None
    result = _grid_run(cfg, params, z0, width, momentum, t_final, dt, stride=args.stride)
    t_unit, l_unit = params.units.unit("time"), params.units.unit("length")
    s = result.autocorr
    rows = [(t * t_unit, c.real, c.imag, abs(c) ** 2, zm * l_unit, n)
            for t, c, zm, n in zip(s.times, s.values, result.mean_position, result.norms)]
    _write(_table(("t_SI", "Re C", "Im C", "|C|^2", "mean_z_SI", "norm"), rows, args.format), args.out)
    if args.checkpoint:
        save_checkpoint(args.checkpoint, result.final, result.steps * result.dt)
    log.info("norm drift %.3g, energy drift %s, dt %.6g (scaled), %d steps",
             result.norm_drift, result.energy_drift, result.dt, result.steps)
    return EXIT_OK


def read_signal(path) -> AutocorrSignal:
    """Autocorrelation CSV as written by ``rtm autocorr`` (needs t_scaled, Re C, Im C)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"t_scaled", "Re C", "Im C"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
        rows = list(reader)
    t = np.array([float(r["t_scaled"]) for r in rows])
    c = np.array([complex(float(r["Re C"]), float(r["Im C"])) for r in rows])
    return AutocorrSignal(t, c)


def cmd_revival(args, cfg: RunConfig) -> int:
    params, z0, *_ = _setup(cfg)
    if not args.input:
        raise UsageError("revival needs --in <signal.csv>")
    signal = read_signal(args.input)
    if args.predicted_t2 is not None:
        predicted = float(to_scaled(args.predicted_t2, "time", params))
    else:
        predicted = float(revival_time_closed_form(z0))
    report = analyze(signal, predicted, cfg.revival.window_frac)
    doc = {
        "classical_period": _estimate(report.classical_period, "time", params),
        "revival_time": _estimate(report.revival_time, "time", params),
        "search_window": {"scaled": list(report.search_window),
                          "si": [float(from_scaled(t, "time", params)) for t in report.search_window]},
        "peaks": [{"time_scaled": p.time, "time_si": float(from_scaled(p.time, "time", params)),
                   "height": p.height, "width_scaled": p.width} for p in report.peaks],
    }
    _write(_document(doc), args.out)
    return EXIT_OK


def cmd_invert_static(args, cfg: RunConfig) -> int:
    if args.t2 is None:
        raise UsageError("invert-static needs --t2 <seconds>")
    href = args.href if args.href is not None else cfg.reference_height
    params = cfg.physical_params(drop_height=href)
    energy = inversion.energy_from_revival(args.t2, params.mass, params.hbar, params.gravity)
    height = inversion.height_from_energy(energy, href, params.mass, params.gravity)
    doc = {"T2_s": args.t2, "reference_height_m": href, "energy_J": energy,
           "energy_scaled": float(to_scaled(energy, "energy", params)), "height_m": height}
    _write(_document(doc), args.out)
    return EXIT_OK


def cmd_invert_dynamic(args, cfg: RunConfig) -> int:
    if args.t2 is None or args.t2mod is None:
        raise UsageError("invert-dynamic needs --t2 and --t2mod")
    params = cfg.physical_params()
    T2 = float(to_scaled(args.t2, "time", params))
    Tl = float(to_scaled(args.t2mod, "time", params))
    E = inversion.energy_from_revival(T2)
    mod = cfg.modulation
    r = args.r if args.r is not None else mod.r
    seed = args.omega_seed if args.omega_seed is not None else mod.omega_seed
    if r is not None:
        ctx = inversion.ModulationContext.from_ratio(E, r)
    elif mod.E_N is not None:
        ctx = inversion.ModulationContext(E, float(to_scaled(mod.E_N, "energy", params)))
    elif seed is not None:
        spectrum = Spectrum.triangular(cfg.spectrum.n_max)
        ctx = inversion.ModulationContext(
            E, inversion.resonant_energy(float(to_scaled(seed, "frequency", params)), spectrum))
    else:
        raise UsageError("invert-dynamic needs --r, --omega-seed, or modulation.E_N/r/omega_seed in the config")
    amplitude = float(to_scaled(args.amplitude, "length", params)) if args.amplitude is not None else None
    speed = args.scan_speed if args.scan_speed is not None else cfg.scan.scan_speed
    res = inversion.invert_dynamic(Estimate(T2, 0.0), Estimate(Tl, 0.0), ctx, amplitude=amplitude,
                                   scan_speed=float(to_scaled(speed, "velocity", params)))
    doc = {
        "amplitude": _estimate(res.amplitude, "length", params),
        "omega": _estimate(res.frequency, "frequency", params),
        "spacing": _estimate(res.spacing, "length", params) if res.spacing else None,
        "alpha_T": res.alpha_T, "roots_found": list(res.roots_found), "residuals": list(res.residuals),
        "r": ctx.r, "E_n0_scaled": E, "E_N_scaled": ctx.E_N,
    }
    _write(_document(doc), args.out)
    return EXIT_OK


def cmd_scan(args, cfg: RunConfig) -> int:
    path = args.profile or cfg.scan.profile
    if not path:
        raise UsageError("scan needs --profile <csv> (or scan.profile in the config)")
    profile = load_profile(path, reference_height=cfg.reference_height)
    result = run_scan(profile, cfg, mode=args.mode, engine=args.engine, jobs=args.jobs)
    if args.out:
        emit_report(result, args.out, args.format)
    else:
        sys.stdout.write(render_report(result, args.format))
    failed = [p for p in result.per_point if not p.ok]
    if result.dynamic_extras is not None and result.dynamic_extras.error:
        log.error("dynamic inversion failed: %s", result.dynamic_extras.error)
        return EXIT_NUMERICAL
    if failed:
        log.warning("%d of %d scan points failed", len(failed), len(result.per_point))
    return EXIT_OK


def cmd_validate(args, cfg: RunConfig) -> int:
    """Check a configuration and report derived quantities and validity estimates."""
    params, z0, width, _ = _setup(cfg)
    problems = []
    try:
        params.check_turning_point(params.mass * params.gravity * cfg.packet.drop_height)
    except ValueError as exc:
        problems.append(str(exc))
    kappa = float(to_scaled(params.kappa, "wavevector", params))
    amplitude = float(to_scaled(cfg.modulation.amplitude, "length", params))
    if amplitude * kappa >= 5:
        problems.append(f"modulation amplitude times kappa = {amplitude * kappa:.3g} must stay below 5")
    if z0 - 4 * width <= 0:
        problems.append("packet overlaps the mirror (drop height must exceed 4 packet widths)")
    doc = {
        "units": {"length_m": params.units.unit("length"), "time_s": params.units.unit("time"),
                  "energy_J": params.units.unit("energy")},
        "drop_height_scaled": z0, "width_scaled": width, "kappa_scaled": kappa,
        "predicted_T1_s": float(from_scaled(2.0 * math.sqrt(2.0 * z0), "time", params)),
        "predicted_T2_s": float(from_scaled(float(revival_time_closed_form(z0)), "time", params)),
        "triangular_well_ok": kappa >= 10.0,
    }
    if cfg.validity is not None:
        v = cfg.validity_params(impact_speed_from_drop(cfg.packet.drop_height, params))
        p_sp, flagged = check_spontaneous_emission(v, params.kappa, params, cfg.validity.threshold)
        doc["spontaneous_emission"] = {"probability": p_sp, "flagged": flagged}
    doc["problems"] = problems
    _write(_document(doc), args.out)
    return EXIT_INVALID if problems else EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (SI units)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--engine", choices=("analytic", "grid"))
    common.add_argument("--jobs", type=int, help="worker processes for scans")

    parser = argparse.ArgumentParser(prog="rtm", description="Revival-time surface probing with bouncing atoms")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="triangular-well levels")
    p.add_argument("--n-max", type=int)
    p.add_argument("--atom")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("autocorr", parents=[common], help="autocorrelation signal")
    p.add_argument("--mode", choices=("analytic", "grid"), help="alias of --engine")
    p.add_argument("--t-final", type=float, help="signal length [s] (default: 3 classical periods)")
    p.set_defaults(func=cmd_autocorr)

    p = sub.add_parser("propagate", parents=[common], help="grid propagation")
    p.add_argument("--t-final", type=float, help="[s]")
    p.add_argument("--dt", type=float, help="[s]")
    p.add_argument("--stride", type=int, help="steps between samples")
    p.add_argument("--checkpoint", help="write the final packet to this binary file")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("revival", parents=[common], help="recurrence times of a signal")
    p.add_argument("--in", dest="input")
    p.add_argument("--predicted-t2", type=float, help="[s] (default: closed form for the configured drop)")
    p.set_defaults(func=cmd_revival)

    p = sub.add_parser("invert-static", parents=[common], help="height from a revival time")
    p.add_argument("--t2", type=float, help="[s]")
    p.add_argument("--href", type=float, help="reference drop height [m]")
    p.set_defaults(func=cmd_invert_static)

    p = sub.add_parser("invert-dynamic", parents=[common], help="modulation amplitude and frequency")
    p.add_argument("--t2", type=float, help="static revival time [s]")
    p.add_argument("--t2mod", type=float, help="modulated revival time [s]")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--r", type=float, help="sqrt(E_N / E_n0)")
    group.add_argument("--omega-seed", type=float, help="[rad/s] frequency fixing E_N by resonance")
    p.add_argument("--amplitude", type=float, help="known amplitude [m] (skips amplitude extraction)")
    p.add_argument("--scan-speed", type=float, help="[m/s]")
    p.set_defaults(func=cmd_invert_dynamic)

    p = sub.add_parser("scan", parents=[common], help="scan a surface profile")
    p.add_argument("--profile")
    p.add_argument("--mode", choices=("static", "dynamic"))
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("validate", parents=[common], help="check a configuration")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("RTM_LOG", "WARNING").upper()
    logging.basicConfig(level=level if isinstance(logging.getLevelName(level), int) else "WARNING",
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        if args.jobs is not None and args.jobs < 1:
            raise UsageError("--jobs must be positive")
        return args.func(args, cfg)
    except NUMERICAL_ERRORS as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (UsageError, *INVALID_ERRORS) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
