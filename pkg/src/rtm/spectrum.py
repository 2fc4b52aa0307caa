"""Triangular-well spectrum of the gravitational cavity and recurrence times.

In scaled units (hbar = m = g = 1) the hard-wall bouncer has levels
E_n = 2^(-1/3) z_n where z_n are the Airy zero magnitudes, and the
recurrence times are T^(j) = 2 pi j! / |d^j E / d n^j| at the mean level n0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy import airy_zero, airy_zeros, asymptotic_zero

#: E_n = ENERGY_SCALE * z_n in scaled units, i.e. (m hbar^2 g^2 / 2)^(1/3).
ENERGY_SCALE = 2.0 ** (-1.0 / 3.0)
#: Argument scale of the eigenfunctions Ai(WAVEVECTOR * z - z_n).
WAVEVECTOR = 2.0 ** (1.0 / 3.0)

SUPPORTED_ORDERS = (1, 2, 3)


class UnsupportedOrderError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ordered eigenenergies E_1 .. E_nmax in scaled units."""

    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ValueError("a spectrum needs at least two levels")
        if not np.all(np.diff(e) > 0):
            raise ValueError("energies must be strictly increasing")
        e.setflags(write=False)
        object.__setattr__(self, "energies", e)

    @classmethod
    def triangular(cls, n_max: int) -> "Spectrum":
        return cls(ENERGY_SCALE * airy_zeros(n_max))

    @property
    def n_max(self) -> int:
        return self.energies.size

    @property
    def levels(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    @property
    def zeros(self) -> np.ndarray:
        """Airy zero magnitudes z_n (meaningful for triangular spectra)."""
        return self.energies / ENERGY_SCALE

    def energy_at(self, n: float) -> float:
        """E at real-valued level index n by a cubic through the four nearest levels."""
        if not 1 <= n <= self.n_max:
            raise ValueError(f"level {n} outside [1, {self.n_max}]")
        if float(n).is_integer():
            return float(self.energies[int(n) - 1])
        start = min(max(int(math.floor(n)) - 1, 1), self.n_max - 3)
        nodes = np.arange(start, start + 4, dtype=float)
        values = self.energies[start - 1:start + 3]
        total = 0.0
        for i in range(4):
            weight = 1.0
            for j in range(4):
                if j != i:
                    weight *= (n - nodes[j]) / (nodes[i] - nodes[j])
            total += weight * values[i]
        return total

    def level_of(self, energy: float) -> float:
        """Inverse of energy_at: the real level index with E(n) = energy."""
        e = self.energies
        if not e[0] <= energy <= e[-1]:
            raise ValueError(f"energy {energy} outside the spectrum range")
        lo = float(np.searchsorted(e, energy))  # E(lo) < energy <= E(lo + 1)
        lo, hi = max(lo, 1.0), min(lo + 1.0, float(self.n_max))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.energy_at(mid) < energy:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13 * hi:
                break
        return 0.5 * (lo + hi)


def energy(n: int, mode: str = "exact") -> float:
    """Scaled triangular-well energy of level n."""
    return ENERGY_SCALE * airy_zero(n, mode)


def large_n_energy(n):
    """Closed-form large-n levels (1/2) (3 pi n)^(2/3) in scaled units."""
    return 0.5 * (3.0 * math.pi * np.asarray(n, dtype=float)) ** (2.0 / 3.0)


def energy_derivative(spectrum: Spectrum, n0: float, order: int) -> float:
    """j-th derivative of E_n with respect to n at real n0 (unit-step central differences)."""
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"energy derivative of order {order} is not supported")
    if not 1 + order <= n0 <= spectrum.n_max - order:
        raise ValueError(f"n0={n0} outside [{1 + order}, {spectrum.n_max - order}] for order {order}")
    e = spectrum.energy_at
    if order == 1:
        return 0.5 * (e(n0 + 1) - e(n0 - 1))
    if order == 2:
        return e(n0 + 1) - 2.0 * e(n0) + e(n0 - 1)
    return 0.5 * (e(n0 + 2) - 2.0 * e(n0 + 1) + 2.0 * e(n0 - 1) - e(n0 - 2))


def recurrence_time(order: int, n0: float, spectrum: Spectrum, hbar: float = 1.0) -> float:
    """T^(j) = 2 pi hbar / ((1/j!) |E^(j)(n0)|)."""
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"recurrence time of order {order} is not supported")
    d = energy_derivative(spectrum, n0, order)
    return 2.0 * math.pi * hbar / (abs(d) / math.factorial(order))


def classical_period(n0: float, spectrum: Spectrum) -> float:
    return recurrence_time(1, n0, spectrum)


def classical_period_from_action(action: float, spectrum: Spectrum, hbar: float) -> float:
    """Classical period 2 pi / |dE/dI| on the action lattice I_n = n hbar."""
    n0 = action / hbar
    e = spectrum.energy_at
    de_di = (e(n0 + 1) - e(n0 - 1)) / (2.0 * hbar)
    return 2.0 * math.pi / abs(de_di)


def revival_time_closed_form(energy_n0, mass: float = 1.0, hbar: float = 1.0, gravity: float = 1.0):
    """T^(2) = 16 E^2 / (m pi hbar g^2)."""
    return 16.0 * np.asarray(energy_n0) ** 2 / (mass * math.pi * hbar * gravity**2)


def revival_time(n0: float, spectrum: Spectrum, method: str = "derivative") -> float:
    if method == "derivative":
        return recurrence_time(2, n0, spectrum)
    if method == "closed_form":
        energy_derivative(spectrum, n0, 2)  # same range contract as the derivative route
        return float(revival_time_closed_form(spectrum.energy_at(n0)))
    raise ValueError(f"unknown revival-time method {method!r}")


def bounce_period(energy_n0, gravity: float = 1.0, mass: float = 1.0):
    """Classical bounce period 2 sqrt(2 E / (m g^2)) off a hard floor."""
    return 2.0 * np.sqrt(2.0 * np.asarray(energy_n0) / (mass * gravity**2))


@dataclass(frozen=True)
class RecurrenceTimes:
    classical_period: float
    revival_time: float
    first_derivative: float
    second_derivative: float

    def __post_init__(self):
        if not (self.classical_period > 0 and self.revival_time > 0):
            raise ValueError("recurrence times must be positive")


def recurrence_times(n0: float, spectrum: Spectrum) -> RecurrenceTimes:
    return RecurrenceTimes(
        classical_period=classical_period(n0, spectrum),
        revival_time=revival_time(n0, spectrum),
        first_derivative=energy_derivative(spectrum, n0, 1),
        second_derivative=energy_derivative(spectrum, n0, 2),
    )


__all__ = [
    "ENERGY_SCALE", "WAVEVECTOR", "Spectrum", "RecurrenceTimes", "UnsupportedOrderError",
    "airy_zero", "asymptotic_zero", "energy", "large_n_energy", "energy_derivative",
    "recurrence_time", "classical_period", "classical_period_from_action",
    "revival_time", "revival_time_closed_form", "bounce_period", "recurrence_times",
]
