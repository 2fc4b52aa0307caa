"""Physical constants, scaled units and experimental-validity estimates.

Everything downstream of this module works in scaled units where
hbar = m = g = 1.  The gravitational length, time and energy scales are

    length_unit = (hbar^2 / (m^2 g))^(1/3)
    time_unit   = (hbar / (m g^2))^(1/3)
    energy_unit = (hbar^2 m g^2)^(1/3)

and SI values only appear when reading configuration or writing reports.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

#: Reduced Planck constant [J s].
HBAR = 1.054_571_817e-34
#: Default gravitational acceleration [m/s^2].
GRAVITY = 9.8

#: Atom masses [kg] available by name in run configurations.
ATOM_MASSES = {
    "cs": 2.2069e-25,
    "cs133": 2.2069e-25,
}

#: Defaults for the evanescent mirror and the released Cs cloud [SI].
DEFAULT_DECAY_LENGTH = 0.55e-6
DEFAULT_DROP_HEIGHT = 20.1e-6
DEFAULT_PACKET_WIDTH = 0.28e-6
DEFAULT_V0_FACTOR = 100.0

#: Per-bounce spontaneous emission probability above which a run is flagged.
SPONTANEOUS_EMISSION_THRESHOLD = 0.1

_DIMENSIONS = {
    # kind: (length exponent, time exponent, energy exponent) of the unit
    "length": (1, 0, 0),
    "time": (0, 1, 0),
    "energy": (0, 0, 1),
    "frequency": (0, -1, 0),
    "wavevector": (-1, 0, 0),
    "velocity": (1, -1, 0),
    "momentum": (0, 0, 0),  # handled explicitly below
}


class ValidityWarning(UserWarning):
    """Raised (as a warning) when spontaneous emission is not negligible."""


@dataclass(frozen=True)
class PhysicalParams:
    """Atom and mirror parameters in SI units.

    ``V0`` is the mirror strength [J] and ``kappa`` the inverse decay length
    of the evanescent field [1/m].
    """

    mass: float
    V0: float
    kappa: float
    gravity: float = GRAVITY
    hbar: float = HBAR

    def __post_init__(self):
        for name in ("mass", "V0", "kappa", "gravity", "hbar"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")

    @classmethod
    def preset(cls, atom: str = "cs", *, gravity: float = GRAVITY,
               decay_length: float = DEFAULT_DECAY_LENGTH,
               drop_height: float = DEFAULT_DROP_HEIGHT,
               V0: Optional[float] = None) -> "PhysicalParams":
        """Named atom with a mirror; ``V0`` defaults to 100 m g drop_height."""
        try:
            mass = ATOM_MASSES[atom.lower()]
        except KeyError:
            raise ValueError(f"unknown atom preset {atom!r}; known: {sorted(ATOM_MASSES)}") from None
        if V0 is None:
            V0 = DEFAULT_V0_FACTOR * mass * gravity * drop_height
        return cls(mass=mass, V0=V0, kappa=1.0 / decay_length, gravity=gravity)

    @property
    def units(self) -> "ScaledUnits":
        return ScaledUnits.from_params(self)

    def check_turning_point(self, energy: float) -> None:
        """Reject a mirror too weak to reflect an atom of ``energy`` [J]."""
        if not self.V0 > energy:
            raise ValueError(
                f"mirror strength V0={self.V0:.6g} J does not exceed the packet energy "
                f"{energy:.6g} J; the turning point would lie below z = 0")


@dataclass(frozen=True)
class ScaledUnits:
    length_unit: float
    time_unit: float
    energy_unit: float

    @classmethod
    def from_params(cls, params: PhysicalParams) -> "ScaledUnits":
        m, g, hbar = params.mass, params.gravity, params.hbar
        return cls(
            length_unit=(hbar**2 / (m**2 * g)) ** (1.0 / 3.0),
            time_unit=(hbar / (m * g**2)) ** (1.0 / 3.0),
            energy_unit=(hbar**2 * m * g**2) ** (1.0 / 3.0),
        )

    def unit(self, kind: str) -> float:
        if kind == "momentum":
            # hbar / length_unit
            return self.energy_unit * self.time_unit / self.length_unit
        try:
            lexp, texp, eexp = _DIMENSIONS[kind]
        except KeyError:
            raise ValueError(f"unknown quantity kind {kind!r}; expected one of {sorted(_DIMENSIONS)}") from None
        return self.length_unit**lexp * self.time_unit**texp * self.energy_unit**eexp


def to_scaled(value, kind: str, params: PhysicalParams):
    """Convert an SI quantity of the given ``kind`` to scaled units."""
    return value / params.units.unit(kind)


def from_scaled(value, kind: str, params: PhysicalParams):
    """Convert a scaled quantity back to SI."""
    return value * params.units.unit(kind)


@dataclass(frozen=True)
class ValidityParams:
    """Inputs of the spontaneous-emission estimate.

    gamma is the excited-state decay rate, delta the (angular) blue detuning,
    v_z the impact speed at the mirror.  omega_max is optional; when absent it
    is eliminated through the light-shift turning-point condition.
    """

    gamma: float
    delta: float
    v_z: float
    omega_max: Optional[float] = None

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.delta > 0:
            raise ValueError("delta must be positive (blue detuning)")
        if not self.v_z > 0:
            raise ValueError("impact speed v_z must be positive")
        if self.omega_max is not None and not self.omega_max > 0:
            raise ValueError("omega_max must be positive when given")


def impact_speed_from_drop(z0: float, params: PhysicalParams) -> float:
    """Free-fall speed after dropping from height ``z0`` [m]."""
    if z0 < 0:
        raise ValueError("drop height must be non-negative")
    return math.sqrt(2.0 * params.gravity * z0)


def rabi_from_light_shift(v: ValidityParams, params: PhysicalParams) -> float:
    """Omega_max satisfying hbar Omega^2 / (4 delta) = m v_z^2 / 2."""
    return math.sqrt(2.0 * params.mass * v.v_z**2 * v.delta / params.hbar)


def spontaneous_emission_probability(v: ValidityParams, kappa: float,
                                     params: PhysicalParams) -> float:
    """Probability of a spontaneous emission during one reflection.

    P = gamma Omega_max^2 / (4 delta^2) * tau_ref with tau_ref = 2 / (kappa v_z).
    Without ``omega_max`` the light-shift condition reduces this to
    gamma m v_z / (hbar delta kappa).
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if v.omega_max is None:
        return v.gamma * params.mass * v.v_z / (params.hbar * v.delta * kappa)
    tau_ref = 2.0 / (kappa * v.v_z)
    return v.gamma * v.omega_max**2 / (4.0 * v.delta**2) * tau_ref


def check_spontaneous_emission(v: ValidityParams, kappa: float, params: PhysicalParams,
                               threshold: float = SPONTANEOUS_EMISSION_THRESHOLD) -> tuple[float, bool]:
    """Return ``(P_sp, flagged)`` and warn when P_sp exceeds ``threshold``."""
    p = spontaneous_emission_probability(v, kappa, params)
    flagged = p > threshold
    if flagged:
        warnings.warn(f"spontaneous emission probability {p:.3g} per bounce exceeds {threshold:g}",
                      ValidityWarning, stacklevel=2)
    return p, flagged
