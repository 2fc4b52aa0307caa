"""Split-step Fourier propagation over the evanescent-wave mirror.

The Hamiltonian in scaled units is

    H(t) = p^2 / 2 + z + V0 exp(-kappa (z - a sin(omega t)))

with a = 0 for a static mirror.  Each step is a Strang splitting
exp(-i T dt/2) exp(-i V(t + dt/2) dt) exp(-i T dt/2); neighbouring kinetic
half steps are fused so one step costs two FFTs.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .spectrum import Spectrum
from .wavepacket import (AutocorrSignal, Grid, GridWavepacket, analytic_autocorrelation,
                         project)

log = logging.getLogger(__name__)

#: dt <= ACCURACY_FACTOR * hbar / V_max_sampled
ACCURACY_FACTOR = 0.02
#: dt <= MODULATION_FRACTION * 2 pi / omega
MODULATION_FRACTION = 0.05
#: Ai-like energy tail beyond which the packet is taken to be absent.
ENERGY_SPREADS = 5.0
BOUNDARY_LIMIT = 1e-6
BELOW_TURNING_DECAY_LENGTHS = 5.0
APEX_HEADROOM = 0.2
MAX_KAPPA_A = 5.0

CHECKPOINT_MAGIC = b"RTMPSI1\x00"
_CHECKPOINT_HEADER = struct.Struct("<8sQddd")


class PropagationError(RuntimeError):
    pass


class StabilityError(PropagationError):
    pass


class BoundaryError(PropagationError):
    pass


@dataclass(frozen=True)
class PotentialModel:
    """Mirror parameters in scaled units; amplitude = 0 is the static mirror."""

    V0: float
    kappa: float
    amplitude: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (self.V0 > 0 and self.kappa > 0):
            raise ValueError("V0 and kappa must be positive")
        if self.amplitude < 0 or self.omega < 0:
            raise ValueError("modulation amplitude and frequency must be non-negative")
        if self.amplitude * self.kappa >= MAX_KAPPA_A:
            raise ValueError(f"kappa * a = {self.amplitude * self.kappa:.3g} must stay below {MAX_KAPPA_A}")

    @property
    def is_static(self) -> bool:
        return self.amplitude == 0.0

    @property
    def time_dependent(self) -> bool:
        return self.omega > 0

    def mirror_factor(self, t: float) -> float:
        """exp(kappa a sin(omega t)), the time dependence of the mirror term."""
        return math.exp(self.kappa * self.amplitude * math.sin(self.omega * t))

    def mirror(self, z) -> np.ndarray:
        return self.V0 * np.exp(np.minimum(-self.kappa * np.asarray(z), 700.0))

    def __call__(self, z, t: float = 0.0) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z + self.mirror(z) * self.mirror_factor(t)


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    autocorr: AutocorrSignal
    mean_position: np.ndarray
    norms: np.ndarray
    norm_drift: float
    energy_drift: Optional[float]
    final: GridWavepacket
    dt: float
    steps: int


def default_grid(z0: float, kappa: float, size: int = 2**14) -> Grid:
    """[-10/kappa, 2.5 z0] on a power-of-two grid."""
    return Grid.spanning(-10.0 / kappa, 2.5 * z0, size)


def energy_moments(packet: GridWavepacket, potential: PotentialModel, t: float = 0.0) -> tuple[float, float]:
    """<H> and its standard deviation at time t."""
    grid = packet.grid
    psi = packet.amplitudes
    h_psi = sfft.ifft(0.5 * grid.k**2 * sfft.fft(psi)) + potential(grid.z, t) * psi
    norm = np.sum(np.abs(psi) ** 2)
    mean = float(np.real(np.vdot(psi, h_psi)) / norm)
    var = float(np.sum(np.abs(h_psi) ** 2) / norm) - mean**2
    return mean, math.sqrt(max(var, 0.0))


def energy_expectation(packet: GridWavepacket, potential: PotentialModel, t: float = 0.0) -> float:
    grid = packet.grid
    psi = packet.amplitudes
    phik = sfft.fft(psi)
    kinetic = float(np.sum(0.5 * grid.k**2 * np.abs(phik) ** 2)) / grid.size
    pot = float(np.sum(potential(grid.z, t) * np.abs(psi) ** 2))
    return (kinetic + pot) / float(np.sum(np.abs(psi) ** 2))


def energy_cap(packet: GridWavepacket, potential: PotentialModel) -> float:
    """Highest energy the packet samples appreciably (mean + 5 spreads, plus the mirror's swing)."""
    mean, spread = energy_moments(packet, potential)
    cap = mean + ENERGY_SPREADS * spread
    if potential.amplitude > 0 and potential.omega > 0:
        # a moving mirror can pump energy; allow one maximal kick
        cap += 2.0 * math.sqrt(2.0 * cap) * potential.amplitude * potential.omega
    return cap


def max_stable_dt(packet: GridWavepacket, potential: PotentialModel,
                  accuracy: float = ACCURACY_FACTOR,
                  modulation_fraction: float = MODULATION_FRACTION) -> float:
    """Step-size bound min(0.05 * 2 pi / omega, 0.02 hbar / V_max_sampled).

    V_max_sampled is the largest potential value inside the region the packet
    can classically reach, which is the energy cap itself.
    """
    z = packet.grid.z
    v = potential(z)
    cap = energy_cap(packet, potential)
    v_max = float(np.max(np.abs(v[v <= cap]))) if np.any(v <= cap) else cap
    dt = accuracy / max(v_max, cap)
    if potential.time_dependent:
        dt = min(dt, modulation_fraction * 2.0 * math.pi / potential.omega)
    return dt


def check_grid(packet: GridWavepacket, potential: PotentialModel) -> None:
    """Turning points need 5/kappa of grid below and 20% headroom above the apex."""
    grid = packet.grid
    cap = energy_cap(packet, potential)
    amp = potential.amplitude
    # lowest mirror position the packet can reach
    lower = math.log(potential.V0 / cap) / potential.kappa - amp
    need_lo = lower - BELOW_TURNING_DECAY_LENGTHS / potential.kappa
    need_hi = (1.0 + APEX_HEADROOM) * cap
    if grid.z_min > need_lo or grid.z_max < need_hi:
        raise BoundaryError(
            f"grid [{grid.z_min:.6g}, {grid.z_max:.6g}] must cover [{need_lo:.6g}, {need_hi:.6g}] "
            f"for energies up to {cap:.6g}")


def evolve(initial: GridWavepacket, potential: PotentialModel, t_final: float,
           dt: Optional[float] = None, sample_stride: int = 1, *,
           accuracy: float = ACCURACY_FACTOR,
           modulation_fraction: float = MODULATION_FRACTION,
           check_boundary: bool = True) -> EvolutionResult:
    """Propagate ``initial`` to ``t_final`` and sample C(t) and <z>(t) every ``sample_stride`` steps.

    Without ``dt`` the largest step allowed by the accuracy rule is used (shrunk
    so the run ends exactly at t_final).  A negative ``t_final`` runs backwards.
    """
    if sample_stride < 1:
        raise ValueError("sample_stride must be >= 1")
    grid = initial.grid
    psi0 = initial.amplitudes
    z = grid.z
    if check_boundary:
        check_grid(initial, potential)
    dt_max = max_stable_dt(initial, potential, accuracy, modulation_fraction)
    direction = 1.0 if t_final >= 0 else -1.0
    duration = abs(t_final)
    if dt is None:
        steps = math.ceil(duration / dt_max * (1 - 1e-12)) if duration > 0 else 0
        dt = duration / steps if steps else dt_max
    else:
        dt = abs(dt)
        if dt > dt_max * (1 + 1e-9):
            raise StabilityError(f"dt={dt:.6g} exceeds the stability bound {dt_max:.6g}")
        steps = int(round(duration / dt))
        if not math.isclose(steps * dt, duration, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"t_final={t_final} is not a multiple of dt={dt}")
    h = direction * dt

    half_kinetic = np.exp(-0.25j * grid.k**2 * h)
    full_kinetic = half_kinetic**2
    gravity_phase = np.exp(-1j * z * h)
    w = potential.mirror(z)
    reach = w * math.exp(potential.kappa * potential.amplitude) * abs(h)
    live = slice(0, int(np.flatnonzero(reach > 1e-18).max()) + 1) if np.any(reach > 1e-18) else slice(0, 0)
    w_live = w[live]
    time_dependent = potential.time_dependent
    if not time_dependent:
        mirror_phase = np.exp(-1j * w_live * h)

    dz = grid.dz
    n_samples = steps // sample_stride + 1
    times = np.empty(n_samples)
    corr = np.empty(n_samples, dtype=complex)
    mean_z = np.empty(n_samples)
    norms = np.empty(n_samples)
    times[0] = 0.0
    corr[0] = np.vdot(psi0, psi0) * dz
    norms[0] = float(np.real(corr[0]))
    mean_z[0] = float(np.sum(z * np.abs(psi0) ** 2) * dz) / norms[0]

    phik = sfft.fft(psi0) * half_kinetic
    psi = psi0
    k = 1
    for step in range(1, steps + 1):
        x = sfft.ifft(phik, overwrite_x=True)
        x *= gravity_phase
        if time_dependent:
            t_mid = (step - 0.5) * h
            x[live] *= np.exp(-1j * h * potential.mirror_factor(t_mid) * w_live)
        else:
            x[live] *= mirror_phase
        phik = sfft.fft(x, overwrite_x=True)
        if step % sample_stride == 0 or step == steps:
            psi = sfft.ifft(phik * half_kinetic)
            if step % sample_stride == 0:
                density = np.abs(psi) ** 2
                times[k] = step * h
                corr[k] = np.vdot(psi0, psi) * dz
                norms[k] = float(np.sum(density) * dz)
                mean_z[k] = float(np.sum(z * density) * dz) / norms[k]
                k += 1
                if check_boundary:
                    edge = max(abs(psi[0]), abs(psi[-1]))
                    if edge > BOUNDARY_LIMIT:
                        raise BoundaryError(
                            f"packet reached the grid boundary at t={step * h:.6g} (|psi|={edge:.3g})")
        phik *= full_kinetic

    final = GridWavepacket(grid, psi)
    final_norm = final.norm
    norm_drift = float(max(np.max(np.abs(norms - norms[0])), abs(final_norm - norms[0])))
    energy_drift = None
    if not time_dependent or potential.amplitude == 0.0:
        e0 = energy_expectation(initial, potential)
        e1 = energy_expectation(final, potential)
        energy_drift = abs(e1 - e0) / abs(e0)
    signal = AutocorrSignal(np.abs(times), corr)
    return EvolutionResult(signal, mean_z, norms, norm_drift, energy_drift, final, dt, steps)


def cross_validate(initial: GridWavepacket, potential: PotentialModel, spectrum: Spectrum,
                   t_final: float, dt: Optional[float] = None, sample_stride: int = 1,
                   min_kappa: float = 10.0) -> float:
    """max_t | |C_grid|^2 - |C_analytic|^2 | for a static mirror."""
    return compare_engines(initial, potential, spectrum, t_final, dt, sample_stride, min_kappa)[0]


def compare_engines(initial: GridWavepacket, potential: PotentialModel, spectrum: Spectrum,
                    t_final: float, dt: Optional[float] = None, sample_stride: int = 1,
                    min_kappa: float = 10.0) -> tuple[float, AutocorrSignal, AutocorrSignal]:
    if not potential.is_static:
        raise ValueError("engine cross-validation needs a static mirror")
    if potential.kappa < min_kappa:
        raise ValueError(f"kappa={potential.kappa} is too soft for the triangular-well comparison "
                         f"(need >= {min_kappa})")
    result = evolve(initial, potential, t_final, dt, sample_stride)
    coeffs = project(initial, spectrum)
    analytic = analytic_autocorrelation(coeffs, spectrum, result.autocorr.times)
    deviation = float(np.max(np.abs(result.autocorr.magnitude2 - analytic.magnitude2)))
    return deviation, result.autocorr, analytic


def save_checkpoint(path, packet: GridWavepacket, t: float = 0.0) -> None:
    """Little-endian: magic 'RTMPSI1\\0', uint64 size, float64 z_min, dz, t, then re/im pairs."""
    grid = packet.grid
    data = np.empty(2 * grid.size, dtype="<f8")
    data[0::2] = packet.amplitudes.real
    data[1::2] = packet.amplitudes.imag
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, grid.size, grid.z_min, grid.dz, t))
        fh.write(data.tobytes())


def load_checkpoint(path) -> tuple[GridWavepacket, float]:
    raw = Path(path).read_bytes()
    magic, size, z_min, dz, t = _CHECKPOINT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not an RTM wavefunction checkpoint")
    data = np.frombuffer(raw, dtype="<f8", offset=_CHECKPOINT_HEADER.size)
    if data.size != 2 * size:
        raise ValueError(f"{path}: truncated checkpoint ({data.size // 2} of {size} points)")
    return GridWavepacket(Grid(z_min, dz, int(size)), data[0::2] + 1j * data[1::2]), t
