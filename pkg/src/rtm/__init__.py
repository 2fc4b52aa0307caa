"""Simulation and analysis toolkit for revival-time surface probing with bouncing atoms.

Atoms released above an evanescent-wave mirror bounce under gravity; the
recurrences of their wave packet encode the mirror position.  The package
computes the triangular-well spectrum, evolves packets on a grid or in the
eigenbasis, measures classical and revival times, and inverts them into
surface heights (static mode) or modulation amplitude/frequency (dynamic mode).
"""
from .physics import PhysicalParams, ScaledUnits, ValidityParams, from_scaled, to_scaled
from .spectrum import Spectrum, classical_period, recurrence_time, revival_time
from .wavepacket import AutocorrSignal, Grid, GridWavepacket, analytic_autocorrelation, make_gaussian, project
from .propagator import PotentialModel, evolve
from .revival import Estimate, RevivalReport, detect_classical_period, detect_revival
from .config import RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams", "ScaledUnits", "ValidityParams", "from_scaled", "to_scaled",
    "Spectrum", "classical_period", "recurrence_time", "revival_time",
    "AutocorrSignal", "Grid", "GridWavepacket", "analytic_autocorrelation", "make_gaussian", "project",
    "PotentialModel", "evolve",
    "Estimate", "RevivalReport", "detect_classical_period", "detect_revival",
    "RunConfig", "load_config",
]
