"""From recurrence times to surface information.

Static mode reads the mean energy from the revival time, T2 = 16 E^2 / (m pi hbar g^2),
and turns it into a height relative to a reference drop.  Dynamic mode reads
the modulation amplitude and frequency of an oscillating mirror from the shift
of the revival time,

    T_lambda = T2 [1 - (1/8) (m g a / E)^2 (3 u + at^2) / (u - at^2)^3],   u = (1 - r)^2,

with r = sqrt(E_N / E) and at = r^2 hbar omega / (4 E).  All functions work in
any consistent unit system; mass, gravity and hbar default to the scaled
values 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .revival import Estimate
from .spectrum import Spectrum, energy_derivative

#: Default calibration slack of height_from_energy, as a fraction of m g H_ref.
CALIBRATION_TOLERANCE = 0.02


class InversionError(ValueError):
    pass


class CalibrationError(InversionError):
    """A recovered energy lies above the reference drop energy."""


class NoResonanceError(InversionError):
    """No level spacing of the spectrum matches the modulation frequency."""


class SingularityError(InversionError):
    """The modulated revival formula is singular ((1-r)^2 = at^2 or r = 1)."""


class RegimeError(InversionError):
    """Measured times violate the regime the inversion formulas assume."""


class InconsistentMeasurementError(InversionError):
    """The frequency equation has no root in the physical interval."""


# --------------------------------------------------------------------------- static mode

def energy_from_revival(T2: float, mass: float = 1.0, hbar: float = 1.0, gravity: float = 1.0) -> float:
    """Invert T2 = 16 E^2 / (m pi hbar g^2)."""
    if not T2 > 0:
        raise InversionError(f"revival time must be positive, got {T2}")
    return math.sqrt(T2 * mass * math.pi * hbar * gravity**2 / 16.0)


def height_from_energy(energy: float, reference_height: float, mass: float = 1.0, gravity: float = 1.0,
                       tolerance: Optional[float] = None) -> float:
    """Surface height h = H_ref - E / (m g).

    A raised surface lifts the mirror and shortens the drop, so a lower
    energy means a higher surface.  Energies above m g H_ref by more than
    ``tolerance`` (an energy; default 2% of m g H_ref) are a calibration
    inconsistency.
    """
    reference_energy = mass * gravity * reference_height
    if tolerance is None:
        tolerance = CALIBRATION_TOLERANCE * abs(reference_energy)
    if energy > reference_energy + tolerance:
        raise CalibrationError(
            f"energy {energy:.6g} exceeds the reference drop energy {reference_energy:.6g} "
            f"by more than {tolerance:.3g}")
    return reference_height - energy / (mass * gravity)


# --------------------------------------------------------------------------- dynamic mode

def resonant_level(omega: float, spectrum: Spectrum, hbar: float = 1.0) -> float:
    """Real level index N whose local spacing dE/dn equals hbar * omega.

    The spacing decreases monotonically with n, so N is found by bisection.
    """
    if not omega > 0:
        raise NoResonanceError("modulation frequency must be positive")
    target = hbar * omega
    lo, hi = 2.0, float(spectrum.n_max - 1)

    def spacing(n):
        return energy_derivative(spectrum, n, 1)

    s_lo, s_hi = spacing(lo), spacing(hi)
    if not s_hi <= target <= s_lo:
        raise NoResonanceError(
            f"hbar*omega = {target:.6g} is outside the level-spacing range [{s_hi:.6g}, {s_lo:.6g}]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spacing(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


def resonant_energy(omega: float, spectrum: Spectrum, hbar: float = 1.0) -> float:
    """E_N at the level resonant with the modulation (see resonant_level)."""
    return spectrum.energy_at(resonant_level(omega, spectrum, hbar))


@dataclass(frozen=True)
class ModulationContext:
    """Parameters of the modulated revival formula.

    ``a_tilde`` may be omitted when the frequency is the unknown being solved for.
    """

    E_n0: float
    E_N: float
    a_tilde: Optional[float] = None

    def __post_init__(self):
        if not (self.E_n0 > 0 and self.E_N > 0):
            raise InversionError("energies must be positive")
        if self.a_tilde is not None and self.a_tilde < 0:
            raise InversionError("a_tilde must be non-negative")

    @classmethod
    def from_ratio(cls, E_n0: float, r: float, a_tilde: Optional[float] = None) -> "ModulationContext":
        if not r > 0:
            raise InversionError("r must be positive")
        return cls(E_n0, r * r * E_n0, a_tilde)

    @classmethod
    def from_frequency(cls, E_n0: float, omega: float, hbar: float = 1.0, *,
                       spectrum: Optional[Spectrum] = None, E_N: Optional[float] = None) -> "ModulationContext":
        """Context for a known modulation frequency; E_N from resonance unless given."""
        if E_N is None:
            if spectrum is None:
                raise InversionError("either E_N or a spectrum to resolve the resonance is required")
            E_N = resonant_energy(omega, spectrum, hbar)
        E_n0, E_N = float(E_n0), float(E_N)
        r2 = E_N / E_n0
        return cls(E_n0, E_N, float(r2 * hbar * omega / (4.0 * E_n0)))

    @property
    def r(self) -> float:
        return math.sqrt(self.E_N / self.E_n0)

    @property
    def u(self) -> float:
        """(1 - r)^2."""
        return (1.0 - self.r) ** 2

    @property
    def singular(self) -> bool:
        x = 0.0 if self.a_tilde is None else self.a_tilde**2
        return self.u == x

    @property
    def in_valid_regime(self) -> bool:
        x = 0.0 if self.a_tilde is None else self.a_tilde**2
        return self.u > x

    def frequency(self, hbar: float = 1.0) -> float:
        """omega = 4 E a_tilde / (r^2 hbar)."""
        if self.a_tilde is None:
            raise InversionError("a_tilde is not set")
        return 4.0 * self.E_n0 * self.a_tilde / (self.r**2 * hbar)

    def with_a_tilde(self, a_tilde: float) -> "ModulationContext":
        return ModulationContext(self.E_n0, self.E_N, a_tilde)


def modulated_revival_time(ctx: ModulationContext, amplitude: float, T2_static: float,
                           mass: float = 1.0, gravity: float = 1.0) -> float:
    """Revival time of the modulated mirror to second order in m g a / E."""
    if ctx.a_tilde is None:
        raise InversionError("modulated_revival_time needs a_tilde (the modulation frequency)")
    u, x = ctx.u, ctx.a_tilde**2
    if u == x:
        raise SingularityError(f"(1-r)^2 = a_tilde^2 = {u:.6g}: the modulated revival time diverges")
    eps = mass * gravity * amplitude / ctx.E_n0
    return T2_static * (1.0 - 0.125 * eps**2 * (3.0 * u + x) / (u - x) ** 3)


def _shift(T2_static: float, T2_modulated: float) -> float:
    if not (T2_static > 0 and T2_modulated > 0):
        raise InversionError("revival times must be positive")
    bracket = 1.0 - T2_modulated / T2_static
    if bracket < 0:
        raise RegimeError(
            f"modulated revival time {T2_modulated:.9g} exceeds the static one {T2_static:.9g}; "
            "the amplitude formula needs a non-negative bracket")
    return bracket


def amplitude_from_times(T2_static: float, T2_modulated: float, ctx: ModulationContext,
                         mass: float = 1.0, gravity: float = 1.0) -> float:
    """a = sqrt(8/3) (E/(m g)) (1 - r)^2 sqrt(1 - T_lambda / T2), the a_tilde -> 0 inverse."""
    if ctx.u == 0:
        raise SingularityError("r = 1: the amplitude formula is singular")
    bracket = _shift(T2_static, T2_modulated)
    return math.sqrt(8.0 / 3.0) * ctx.E_n0 / (mass * gravity) * ctx.u * math.sqrt(bracket)


def alpha_T(T2_static: float, T2_modulated: float, amplitude: float, E_n0: float,
            mass: float = 1.0, gravity: float = 1.0) -> float:
    """alpha_T = 8 (E / (m g a))^2 (1 - T_lambda / T2)."""
    if not amplitude > 0:
        raise InversionError("frequency extraction needs a positive amplitude")
    return 8.0 * (E_n0 / (mass * gravity * amplitude)) ** 2 * _shift(T2_static, T2_modulated)


def frequency_polynomial(x, alpha: float, u: float):
    """(u - x)^3 alpha - (3u + x); its root x = a_tilde^2 fixes the frequency."""
    x = np.asarray(x, dtype=float)
    return (u - x) ** 3 * alpha - (3.0 * u + x)


@dataclass(frozen=True)
class FrequencySolution:
    omega: float
    a_tilde: float
    alpha_T: float
    roots: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def frequency_from_times(T2_static: float, T2_modulated: float, amplitude: float, ctx: ModulationContext,
                         mass: float = 1.0, gravity: float = 1.0, hbar: float = 1.0) -> FrequencySolution:
    """Solve the frequency equation for x = a_tilde^2 in [0, (1 - r)^2) and return omega.

    For alpha > 0 the cubic falls strictly across the interval, so at most one
    physical root exists; the root is bracketed and bisected to machine
    precision.  A left-end value negative only by rounding is read as x = 0.
    Every real root of the cubic is reported in ``roots`` (physical one first).
    """
    u = ctx.u
    if u == 0:
        raise SingularityError("r = 1: the frequency equation is singular")
    alpha = alpha_T(T2_static, T2_modulated, amplitude, ctx.E_n0, mass, gravity)
    p0 = float(frequency_polynomial(0.0, alpha, u))
    rounding = 64 * np.finfo(float).eps * 3.0 * u
    if p0 < -rounding:
        raise InconsistentMeasurementError(
            f"no root of the frequency equation in [0, {u:.6g}) (alpha_T = {alpha:.6g} < 3/(1-r)^4)")
    if p0 <= rounding:
        x = 0.0
    else:
        lo, hi = 0.0, u
        while True:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if frequency_polynomial(mid, alpha, u) > 0:
                lo = mid
            else:
                hi = mid
        x = lo if abs(frequency_polynomial(lo, alpha, u)) <= abs(frequency_polynomial(hi, alpha, u)) else hi
    others = [float(r.real) for r in np.roots([-alpha, 3 * alpha * u, -3 * alpha * u * u - 1.0,
                                                alpha * u**3 - 3 * u])
              if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and not (0 <= r.real < u)]
    roots = [x] + sorted(others)
    residuals = [float(frequency_polynomial(root, alpha, u)) for root in roots]
    a_tilde = math.sqrt(x)
    omega = 4.0 * ctx.E_n0 * a_tilde / (ctx.r**2 * hbar)
    return FrequencySolution(omega, a_tilde, alpha, roots, residuals)


def structure_spacing(omega: float, scan_speed: float) -> float:
    """Lateral period of the structures: 2 pi v / omega."""
    if not (omega > 0 and scan_speed > 0):
        raise InversionError("omega and scan speed must be positive")
    return 2.0 * math.pi * scan_speed / omega


@dataclass(frozen=True)
class InversionResult:
    amplitude: Estimate
    frequency: Estimate
    alpha_T: float
    roots_found: list
    residuals: list
    spacing: Optional[Estimate] = None

    def __post_init__(self):
        if self.amplitude.value < 0 or self.frequency.value < 0:
            raise InversionError("amplitude and frequency must be non-negative")


def amplitude_sensitivity(T2_static: float, T2_modulated: float, ctx: ModulationContext,
                          mass: float = 1.0, gravity: float = 1.0) -> tuple[float, float]:
    """(da/dT2_static, da/dT_lambda) of amplitude_from_times."""
    a = amplitude_from_times(T2_static, T2_modulated, ctx, mass, gravity)
    gap = T2_static - T2_modulated
    if gap == 0:
        return math.inf, -math.inf
    return a * T2_modulated / (2.0 * T2_static * gap), -a / (2.0 * gap)


def invert_dynamic(T2_static: Estimate, T2_modulated: Estimate, ctx: ModulationContext,
                   amplitude: Optional[float] = None, scan_speed: Optional[float] = None,
                   mass: float = 1.0, gravity: float = 1.0, hbar: float = 1.0) -> InversionResult:
    """Sequential dynamic-mode inversion: amplitude first (unless supplied), then frequency.

    Uncertainties are propagated to first order from the two revival-time
    uncertainties, treated as independent.
    """
    T2, Tl = float(T2_static.value), float(T2_modulated.value)
    if amplitude is None:
        a = amplitude_from_times(T2, Tl, ctx, mass, gravity)
        d_static, d_mod = amplitude_sensitivity(T2, Tl, ctx, mass, gravity)
        a_err = math.hypot(d_static * T2_static.uncertainty, d_mod * T2_modulated.uncertainty)
    else:
        a, a_err = float(amplitude), 0.0
    sol = frequency_from_times(T2, Tl, a, ctx, mass, gravity, hbar)

    def omega_of(t2, tl):
        aa = a if amplitude is not None else amplitude_from_times(t2, tl, ctx, mass, gravity)
        return frequency_from_times(t2, tl, aa, ctx, mass, gravity, hbar).omega

    w_err = 0.0
    for idx, est in enumerate((T2_static, T2_modulated)):
        sigma = float(est.uncertainty)
        if sigma <= 0:
            continue
        h = 1e-6 * (T2 - Tl) if T2 > Tl else 1e-9 * T2
        args_p, args_m = [T2, Tl], [T2, Tl]
        args_p[idx] += h
        args_m[idx] -= h
        try:
            slope = (omega_of(*args_p) - omega_of(*args_m)) / (2 * h)
        except InversionError:
            slope = math.inf
        w_err = math.hypot(w_err, slope * sigma)
    spacing = None
    if scan_speed is not None and sol.omega > 0:
        s = structure_spacing(sol.omega, scan_speed)
        spacing = Estimate(s, s * w_err / sol.omega)
    return InversionResult(Estimate(a, a_err), Estimate(sol.omega, w_err), sol.alpha_T,
                           sol.roots, sol.residuals, spacing)


__all__ = [
    "CalibrationError", "InversionError", "NoResonanceError", "SingularityError", "RegimeError",
    "InconsistentMeasurementError", "energy_from_revival", "height_from_energy", "resonant_level",
    "resonant_energy", "ModulationContext", "modulated_revival_time", "amplitude_from_times",
    "alpha_T", "frequency_polynomial", "FrequencySolution", "frequency_from_times",
    "structure_spacing", "InversionResult", "amplitude_sensitivity", "invert_dynamic",
]
