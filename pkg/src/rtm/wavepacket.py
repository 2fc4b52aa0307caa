"""Initial wave packets, eigenbasis projection and the eigenbasis autocorrelation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .airy import airy_ai
from .spectrum import WAVEVECTOR, Spectrum

DEFAULT_GRID_SIZE = 2**14
TRUNCATION_WIDTHS = 8.0


class InsufficientBasisError(ValueError):
    """The spectrum does not carry enough levels to represent a packet."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid z_i = z_min + i dz, i = 0 .. size-1."""

    z_min: float
    dz: float
    size: int

    def __post_init__(self):
        if self.size < 8 or self.size & (self.size - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.size}")
        if not self.dz > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def spanning(cls, z_lo: float, z_hi: float, size: int = DEFAULT_GRID_SIZE) -> "Grid":
        """Grid covering [z_lo, z_hi] with z = 0 falling on a node."""
        if not z_hi > z_lo:
            raise ValueError("empty grid span")
        dz = (z_hi - z_lo) / (size - 2)
        z_min = math.floor(z_lo / dz) * dz
        return cls(z_min=z_min, dz=dz, size=size)

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.size)

    @property
    def z_max(self) -> float:
        return self.z_min + self.dz * (self.size - 1)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * math.pi * np.fft.fftfreq(self.size, self.dz)


@dataclass(frozen=True, eq=False)
class GridWavepacket:
    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.grid.size,):
            raise ValueError("amplitude array does not match the grid")
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dz)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def mean_position(self) -> float:
        return float(np.sum(self.grid.z * self.density) * self.grid.dz / self.norm)

    def boundary_ratio(self) -> float:
        mag = np.abs(self.amplitudes)
        return float(max(mag[0], mag[-1]) / mag.max())

    def overlap(self, other: "GridWavepacket") -> complex:
        """<self|other> on the shared grid."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.grid.dz)


def make_gaussian(z0: float, width: float, grid: Optional[Grid] = None,
                  mean_momentum: float = 0.0) -> GridWavepacket:
    """Normalized Gaussian whose density has standard deviation ``width`` around ``z0``.

    The packet is released from rest by default.  Without a grid, one spanning
    [0, 2.5 z0] is used.
    """
    if not width > 0:
        raise ValueError("packet width must be positive")
    if not z0 - 4.0 * width > 0:
        raise ValueError(f"packet at z0={z0} with width {width} overlaps the mirror (need z0 > 4 width)")
    if grid is None:
        grid = Grid.spanning(0.0, 2.5 * z0)
    if grid.z_min > 0 or grid.z_max < 2.5 * z0:
        raise ValueError(
            f"grid [{grid.z_min:.6g}, {grid.z_max:.6g}] too small; it must span at least [0, {2.5 * z0:.6g}]")
    z = grid.z
    psi = np.exp(-((z - z0) ** 2) / (4.0 * width**2) + 1j * mean_momentum * z)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dz)
    return GridWavepacket(grid, psi)


def eigenfunctions(grid: Grid, spectrum: Spectrum, levels, normalization: str = "grid") -> np.ndarray:
    """Rows phi_n(z) = Ai(2^(1/3) z - z_n) / N_n on the grid, zero below the wall.

    ``normalization`` is 'grid' (numerical, default) or 'analytic', using
    the closed form N_n^2 = Ai'(-z_n)^2 / 2^(1/3).
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=int))
    z = grid.z
    inside = z >= 0
    zn = spectrum.zeros[levels - 1]
    out = np.zeros((levels.size, grid.size))
    zi = z[inside]
    for row, root in enumerate(zn):
        x = WAVEVECTOR * zi - root
        vals = np.zeros_like(x)
        live = x < 45.0  # Ai(45) ~ 1e-88
        vals[live] = airy_ai(x[live])[0]
        out[row, inside] = vals
    if normalization == "grid":
        norms = np.sqrt(np.sum(out**2, axis=1) * grid.dz)
    elif normalization == "analytic":
        norms = np.abs(airy_ai(-zn)[1]) / math.sqrt(WAVEVECTOR)
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return out / norms[:, None]


@dataclass(frozen=True, eq=False)
class EigenCoefficients:
    """Amplitudes c_n aligned with a spectrum (index n - 1)."""

    coefficients: np.ndarray
    n0_mean: float
    width: float

    @classmethod
    def from_array(cls, coefficients) -> "EigenCoefficients":
        c = np.asarray(coefficients, dtype=complex)
        w = np.abs(c) ** 2
        total = w.sum()
        n = np.arange(1, c.size + 1)
        mean = float(np.sum(n * w) / total)
        width = float(math.sqrt(max(np.sum((n - mean) ** 2 * w) / total, 0.0)))
        return cls(c, mean, width)

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.coefficients) ** 2

    @property
    def levels(self) -> np.ndarray:
        return np.flatnonzero(self.coefficients) + 1


def _candidate_levels(packet: GridWavepacket, spectrum: Spectrum, widths: float = 12.0) -> np.ndarray:
    """Levels within +- ``widths`` energy deviations of the packet's mean triangular-well energy.

    Levels outside carry negligible weight; if they did not, the weight
    deficit check in project() would report it.
    """
    grid = packet.grid
    psi = packet.amplitudes * (grid.z >= 0)
    h_psi = np.fft.ifft(0.5 * grid.k**2 * np.fft.fft(psi)) + grid.z * psi
    norm = np.sum(np.abs(psi) ** 2)
    mean = float(np.real(np.vdot(psi, h_psi)) / norm)
    spread = math.sqrt(max(float(np.sum(np.abs(h_psi) ** 2)) / norm - mean**2, 0.0))
    margin = widths * spread + 2.0 * float(np.max(np.diff(spectrum.energies)))
    e = spectrum.energies
    return spectrum.levels[(e >= mean - margin) & (e <= mean + margin)]


def project(packet: GridWavepacket, spectrum: Spectrum, tolerance: float = 1e-6,
            normalization: str = "grid") -> EigenCoefficients:
    """Eigenbasis amplitudes c_n = <phi_n|psi>, truncated to n0 +- 8 Delta n and renormalized."""
    levels = _candidate_levels(packet, spectrum)
    c = np.zeros(spectrum.n_max, dtype=complex)
    block = 64
    for start in range(0, levels.size, block):
        chunk = levels[start:start + block]
        phi = eigenfunctions(packet.grid, spectrum, chunk, normalization)
        c[chunk - 1] = phi @ packet.amplitudes * packet.grid.dz
    norm = packet.norm
    deficit = 1.0 - float(np.sum(np.abs(c) ** 2)) / norm
    if deficit > tolerance:
        raise InsufficientBasisError(
            f"{spectrum.n_max} levels leave a weight deficit of {deficit:.3g} (> {tolerance:g}); "
            "increase n_max")
    full = EigenCoefficients.from_array(c)
    lo = max(1, math.floor(full.n0_mean - TRUNCATION_WIDTHS * full.width))
    hi = min(spectrum.n_max, math.ceil(full.n0_mean + TRUNCATION_WIDTHS * full.width))
    kept = np.zeros_like(c)
    kept[lo - 1:hi] = c[lo - 1:hi]
    dropped = 1.0 - float(np.sum(np.abs(kept) ** 2)) / norm
    if dropped > tolerance:
        raise InsufficientBasisError(f"truncation window [{lo}, {hi}] drops weight {dropped:.3g}")
    kept /= math.sqrt(np.sum(np.abs(kept) ** 2))
    return EigenCoefficients.from_array(kept)


def synthesize(coeffs: EigenCoefficients, spectrum: Spectrum, grid: Grid,
               normalization: str = "grid") -> GridWavepacket:
    """Rebuild a grid packet sum_n c_n phi_n(z)."""
    levels = coeffs.levels
    phi = eigenfunctions(grid, spectrum, levels, normalization)
    return GridWavepacket(grid, coeffs.coefficients[levels - 1] @ phi)


@dataclass(frozen=True, eq=False)
class AutocorrSignal:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def magnitude2(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def sample_spacing(self) -> float:
        return float(np.median(np.diff(self.times)))

    def window(self, t_lo: float, t_hi: float) -> "AutocorrSignal":
        keep = (self.times >= t_lo) & (self.times <= t_hi)
        return AutocorrSignal(self.times[keep], self.values[keep])


def analytic_autocorrelation(coeffs: EigenCoefficients, spectrum: Spectrum, times,
                             chunk: int = 4096) -> AutocorrSignal:
    """C(t) = sum_n |c_n|^2 exp(-i E_n t) over the given times."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1:
        raise ValueError("times must be one-dimensional")
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("times must be non-negative and sorted")
    w = coeffs.weights
    live = w > 0
    w = w[live]
    e = spectrum.energies[live]
    e_ref = float(np.sum(w * e) / np.sum(w))
    de = e - e_ref
    out = np.empty(times.size, dtype=complex)
    for start in range(0, times.size, chunk):
        t = times[start:start + chunk]
        out[start:start + chunk] = np.exp(-1j * np.outer(t, de)) @ w
    # restore the common phase removed for accuracy at long times
    out *= np.exp(-1j * e_ref * times)
    return AutocorrSignal(times, out)
