"""JSON run configuration shared by every CLI subcommand (SI units throughout).

Example::

    {
      "atom": "cs",                       # preset name or {"mass": kg}
      "gravity": 9.8,
      "mirror": {"V0": null, "kappa": 1.818e6},   # V0 null -> 100 m g H
      "validity": {"gamma": 3.27e7, "delta": 6.28e9},
      "packet": {"drop_height": 20.1e-6, "width": 0.28e-6},
      "spectrum": {"n_max": 400},
      "grid": {"size": 8192},
      "propagation": {"t_final": null, "dt": null, "samples_per_period": 50, "accuracy": 0.02},
      "revival": {"window_frac": 0.3, "samples_per_period": 50},
      "modulation": {"amplitude": 0.0, "omega": 6283.19},
      "scan": {"reference_height": 20.1e-6, "scan_speed": 1e-6, "mode": "static"}
    }

Unknown keys are rejected so that typos do not silently fall back to defaults.
Command-line flags override the corresponding fields.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

from .physics import (ATOM_MASSES, DEFAULT_DECAY_LENGTH, DEFAULT_DROP_HEIGHT, DEFAULT_PACKET_WIDTH,
                      DEFAULT_V0_FACTOR, GRAVITY, HBAR, PhysicalParams, ValidityParams)
from .propagator import ACCURACY_FACTOR


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _build(cls, data: Optional[dict], where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _positive(value, name, allow_none=False):
    if value is None and allow_none:
        return
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive number, got {value!r}")


@dataclass(frozen=True)
class MirrorConfig:
    V0: Optional[float] = None
    kappa: float = 1.0 / DEFAULT_DECAY_LENGTH

    def __post_init__(self):
        _positive(self.V0, "V0", allow_none=True)
        _positive(self.kappa, "kappa")


@dataclass(frozen=True)
class ValidityConfig:
    gamma: float = 0.0
    delta: float = 1.0
    omega_max: Optional[float] = None
    threshold: float = 0.1


@dataclass(frozen=True)
class PacketConfig:
    drop_height: float = DEFAULT_DROP_HEIGHT
    width: float = DEFAULT_PACKET_WIDTH
    mean_momentum: float = 0.0

    def __post_init__(self):
        _positive(self.drop_height, "drop_height")
        _positive(self.width, "width")


@dataclass(frozen=True)
class SpectrumConfig:
    n_max: int = 400

    def __post_init__(self):
        if not isinstance(self.n_max, int) or self.n_max < 4:
            raise ValueError(f"n_max must be an integer >= 4, got {self.n_max!r}")


@dataclass(frozen=True)
class GridConfig:
    size: int = 2**14
    z_min: Optional[float] = None
    z_max: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.size, int) or self.size < 8 or self.size & (self.size - 1):
            raise ValueError(f"grid size must be a power of two >= 8, got {self.size!r}")


@dataclass(frozen=True)
class PropagationConfig:
    t_final: Optional[float] = None
    dt: Optional[float] = None
    samples_per_period: int = 50
    #: step-size factor c in dt <= c hbar / V_max; raising it trades accuracy for speed
    accuracy: float = ACCURACY_FACTOR

    def __post_init__(self):
        _positive(self.dt, "dt", allow_none=True)
        _positive(self.accuracy, "accuracy")
        if not isinstance(self.samples_per_period, int) or self.samples_per_period < 1:
            raise ValueError("samples_per_period must be a positive integer")


@dataclass(frozen=True)
class RevivalConfig:
    window_frac: float = 0.3
    samples_per_period: int = 50

    def __post_init__(self):
        if not 0 < self.window_frac < 1:
            raise ValueError("window_frac must lie in (0, 1)")
        if not isinstance(self.samples_per_period, int) or self.samples_per_period < 4:
            raise ValueError("samples_per_period must be an integer >= 4")


@dataclass(frozen=True)
class ModulationConfig:
    amplitude: float = 0.0
    omega: float = 0.0
    E_N: Optional[float] = None
    r: Optional[float] = None
    omega_seed: Optional[float] = None

    def __post_init__(self):
        if self.amplitude < 0 or self.omega < 0:
            raise ValueError("modulation amplitude and omega must be non-negative")


@dataclass(frozen=True)
class ScanConfig:
    profile: Optional[str] = None
    reference_height: Optional[float] = None
    scan_speed: float = 1e-6
    mode: str = "static"
    engine: Optional[str] = None
    jobs: int = 1
    failure_limit: float = 0.5
    calibration_tolerance: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("static", "dynamic"):
            raise ValueError(f"scan mode must be 'static' or 'dynamic', got {self.mode!r}")
        if self.engine not in (None, "analytic", "grid"):
            raise ValueError(f"engine must be 'analytic' or 'grid', got {self.engine!r}")
        _positive(self.scan_speed, "scan_speed")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ValueError("jobs must be a positive integer")


@dataclass(frozen=True)
class RunConfig:
    atom: Union[str, dict] = "cs"
    gravity: float = GRAVITY
    hbar: float = HBAR
    mirror: MirrorConfig = field(default_factory=MirrorConfig)
    validity: Optional[ValidityConfig] = None
    packet: PacketConfig = field(default_factory=PacketConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    revival: RevivalConfig = field(default_factory=RevivalConfig)
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)

    @property
    def mass(self) -> float:
        if isinstance(self.atom, str):
            try:
                return ATOM_MASSES[self.atom.lower()]
            except KeyError:
                raise ConfigError(f"unknown atom preset {self.atom!r}; known: {sorted(ATOM_MASSES)}") from None
        if isinstance(self.atom, dict) and set(self.atom) == {"mass"}:
            _positive(self.atom["mass"], "atom.mass")
            return float(self.atom["mass"])
        raise ConfigError("atom must be a preset name or {\"mass\": kg}")

    @property
    def reference_height(self) -> float:
        return self.scan.reference_height if self.scan.reference_height is not None else self.packet.drop_height

    def physical_params(self, drop_height: Optional[float] = None) -> PhysicalParams:
        """Physical parameters; V0 defaults to 100 m g H for the given (or configured) drop."""
        mass = self.mass
        drop = self.packet.drop_height if drop_height is None else drop_height
        V0 = self.mirror.V0 if self.mirror.V0 is not None else DEFAULT_V0_FACTOR * mass * self.gravity * drop
        try:
            return PhysicalParams(mass=mass, V0=V0, kappa=self.mirror.kappa, gravity=self.gravity, hbar=self.hbar)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validity_params(self, impact_speed: float) -> Optional[ValidityParams]:
        if self.validity is None:
            return None
        v = self.validity
        try:
            return ValidityParams(gamma=v.gamma, delta=v.delta, v_z=impact_speed, omega_max=v.omega_max)
        except ValueError as exc:
            raise ConfigError(f"validity: {exc}") from exc

    def with_overrides(self, **sections: dict) -> "RunConfig":
        """Copy with individual fields of sections replaced, skipping None values."""
        out = self
        for name, values in sections.items():
            values = {k: v for k, v in values.items() if v is not None}
            if values:
                try:
                    out = replace(out, **{name: replace(getattr(out, name), **values)})
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name}: {exc}") from exc
        return out

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "mirror": MirrorConfig, "validity": ValidityConfig, "packet": PacketConfig,
    "spectrum": SpectrumConfig, "grid": GridConfig, "propagation": PropagationConfig,
    "revival": RevivalConfig, "modulation": ModulationConfig, "scan": ScanConfig,
}


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if key == "validity" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    for key in ("gravity", "hbar"):
        if key in kwargs:
            try:
                _positive(kwargs[key], key)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    cfg = RunConfig(**kwargs)
    cfg.mass  # validate the atom entry eagerly
    return cfg


def load_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Read a JSON configuration; ``None`` gives the defaults (Cs drop of 20.1 um)."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data)
