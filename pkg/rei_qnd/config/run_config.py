"""
Run configuration: built-in defaults < JSON config file < command-line flags.

A config file is a JSON object such as

    {"preset": "nd_yvo4_demonstrated",
     "overrides": {"quality_factor": 300000},
     "alpha": 2.0, "n_m": 2, "p_det": 0.9}

Every field is validated before any computation; errors name the field.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from ..cavity.params import CavitySystem, build_system, specs_from_values
from ..errors import ConfigValidationError, InvalidInputError
from ..measurement.protocol import DephasingPolicy, ProtocolErrors
from .presets import PRESETS, QUOTED_VALUES, SPEC_KEYS, TWO_PI, preset_names


logger = logging.getLogger(__name__)

DEFAULT_PRESET = "nd_yvo4_demonstrated"
OUTPUT_FORMATS = ("csv", "json")

_FLOAT_FIELDS = (
    "alpha", "p_det", "phi_p", "phi_r",
    "delta_min_g", "delta_max_g", "t_p_min_us", "t_p_max_us",
    "dynamics_t_p", "dynamics_amplitude", "dynamics_offstate_g", "dynamics_carrier_g",
)
_OPTIONAL_FLOAT_FIELDS = ("t_p_us", "rabi_frequency_hz", "n_cyc", "dynamics_dt")
_INT_FIELDS = ("n_m", "points", "grid_points")


@dataclass(frozen=True)
class RunConfig:
    """
    Options shared by every subcommand.

    Attributes:
        preset: Preset name, None for the command default
        overrides: Spec values replacing the preset's (same keys as presets)
        alpha: Superposition time multiplier
        t_p_us: Pulse duration for ``protocol``; None uses the closed-form optimum
        n_m: Minimum detected photons
        p_det: Detector efficiency
        phi_p, phi_r: Preparation and readout rotation errors (rad)
        rabi_frequency_hz: Readout drive Omega/2pi; None uses gamma
        n_cyc: Cycle-count override
        delta_min_g, delta_max_g, points: Spectrum sweep in units of g
        t_p_min_us, t_p_max_us, grid_points: Optimize scan grid (log-spaced)
        dynamics_*: Normalized pulse for ``dynamics`` (t_p, amplitude, Delta/g, delta/g, dt)
        output: Output path, None for stdout
        output_format: csv or json, None for the command default
        timestamp: Add generated_at to JSON reports
    """

    preset: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)
    alpha: float = 2.0
    t_p_us: Optional[float] = None
    n_m: int = 2
    p_det: float = 0.9
    phi_p: float = 0.0
    phi_r: float = 0.0
    rabi_frequency_hz: Optional[float] = None
    n_cyc: Optional[float] = None
    delta_min_g: float = -30.0
    delta_max_g: float = 30.0
    points: int = 601
    t_p_min_us: float = 1.0
    t_p_max_us: float = 100.0
    grid_points: int = 199
    dynamics_t_p: float = 20.0
    dynamics_amplitude: float = 1.0
    dynamics_offstate_g: float = 0.0
    dynamics_carrier_g: float = 0.0
    dynamics_dt: Optional[float] = None
    output: Optional[str] = None
    output_format: Optional[str] = None
    timestamp: bool = True

    @classmethod
    def field_names(cls) -> List[str]:
        return [item.name for item in fields(cls)]

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """Build from a mapping, rejecting unknown keys and validating every field."""
        unknown = sorted(set(values) - set(cls.field_names()))
        if unknown:
            raise ConfigValidationError(unknown[0], f"unknown config key; allowed: {', '.join(cls.field_names())}")
        config = cls(**dict(values))
        config.validate()
        return config

    @classmethod
    def load(cls, config_path: Optional[str] = None, cli_values: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        """
        Merge defaults, an optional JSON file and CLI values.

        Args:
            config_path: JSON config file
            cli_values: Flag values; None entries mean "not given"

        Returns:
            RunConfig: Validated configuration
        """
        merged: Dict[str, Any] = {}
        if config_path is not None:
            merged.update(_read_config_file(config_path))
        for key, value in (cli_values or {}).items():
            if value is not None:
                merged[key] = value
        config = cls.from_mapping(merged)
        logger.debug(f"Run config: {asdict(config)}")
        return config

    def with_values(self, **changes: Any) -> "RunConfig":
        config = replace(self, **changes)
        config.validate()
        return config

    # ==========================================================================
    # Validation
    # ==========================================================================

    def validate(self) -> None:
        """Type-check every field, then check physical invariants."""
        for name in _FLOAT_FIELDS:
            _require_number(name, getattr(self, name))
        for name in _OPTIONAL_FLOAT_FIELDS:
            if getattr(self, name) is not None:
                _require_number(name, getattr(self, name))
        for name in _INT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigValidationError(name, f"expected an integer, got {value!r}")
        if not isinstance(self.timestamp, bool):
            raise ConfigValidationError("timestamp", f"expected true or false, got {self.timestamp!r}")

        for name in ("preset", "output", "output_format"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise ConfigValidationError(name, f"expected a string, got {value!r}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigValidationError("preset", f"unknown preset '{self.preset}'; options: {', '.join(preset_names())}")
        if not isinstance(self.overrides, Mapping):
            raise ConfigValidationError("overrides", "expected an object of parameter values")
        for key, value in self.overrides.items():
            if key not in SPEC_KEYS:
                raise ConfigValidationError(f"overrides.{key}", f"unknown parameter; allowed: {', '.join(SPEC_KEYS)}")
            if not (key == "mode_volume_m3" and value is None):
                _require_number(f"overrides.{key}", value)
        try:
            specs_from_values(self.spec_values())
        except InvalidInputError as e:
            raise ConfigValidationError("overrides", str(e)) from e

        if not self.alpha >= 1:
            raise ConfigValidationError("alpha", f"must be >= 1, got {self.alpha}")
        if not 0 < self.p_det < 1:
            raise ConfigValidationError("p_det", f"must lie in (0, 1), got {self.p_det}")
        if self.n_m < 1:
            raise ConfigValidationError("n_m", f"must be >= 1, got {self.n_m}")
        for name in ("phi_p", "phi_r"):
            if not abs(getattr(self, name)) < math.pi / 4:
                raise ConfigValidationError(name, f"|{name}| must be < pi/4, got {getattr(self, name)}")
        for name in ("t_p_us", "rabi_frequency_hz", "n_cyc", "dynamics_dt"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigValidationError(name, f"must be > 0, got {value}")
        if self.points < 2:
            raise ConfigValidationError("points", f"must be >= 2, got {self.points}")
        if not self.delta_max_g > self.delta_min_g:
            raise ConfigValidationError("delta_max_g", f"must exceed delta_min_g = {self.delta_min_g}")
        if self.grid_points < 1:
            raise ConfigValidationError("grid_points", f"T_p grid is empty (grid_points = {self.grid_points})")
        if not self.t_p_min_us > 0:
            raise ConfigValidationError("t_p_min_us", f"must be > 0, got {self.t_p_min_us}")
        if self.grid_points > 1 and not self.t_p_max_us > self.t_p_min_us:
            raise ConfigValidationError("t_p_max_us", f"must exceed t_p_min_us = {self.t_p_min_us}")
        if not self.dynamics_t_p > 0:
            raise ConfigValidationError("dynamics_t_p", f"must be > 0, got {self.dynamics_t_p}")
        if not self.dynamics_offstate_g >= 0:
            raise ConfigValidationError("dynamics_offstate_g", f"must be >= 0, got {self.dynamics_offstate_g}")
        if self.output_format is not None and self.output_format not in OUTPUT_FORMATS:
            raise ConfigValidationError("output_format", f"must be one of {', '.join(OUTPUT_FORMATS)}")

    # ==========================================================================
    # Derived objects
    # ==========================================================================

    @property
    def preset_name(self) -> str:
        return self.preset or DEFAULT_PRESET

    def spec_values(self) -> Dict[str, Any]:
        return {**PRESETS[self.preset_name], **self.overrides}

    def system(self) -> CavitySystem:
        """Preset with overrides applied, derived."""
        cavity, ion, spin = specs_from_values(self.spec_values())
        quoted = QUOTED_VALUES.get(self.preset_name) if not self.overrides else None
        return build_system(self.preset_name, cavity, ion, spin, quoted)

    def protocol_errors(self) -> ProtocolErrors:
        return ProtocolErrors(prep_angle_error=self.phi_p, readout_angle_error=self.phi_r)

    def dephasing_policy(self, system: CavitySystem) -> DephasingPolicy:
        return DephasingPolicy(system.spin.spin_dephasing_rate, self.alpha)

    @property
    def rabi_frequency(self) -> Optional[float]:
        """Omega in rad/s."""
        return None if self.rabi_frequency_hz is None else TWO_PI * self.rabi_frequency_hz

    @property
    def t_p(self) -> Optional[float]:
        return None if self.t_p_us is None else self.t_p_us * 1e-6

    def t_p_grid(self) -> np.ndarray:
        """Log-spaced scan durations in s."""
        if self.grid_points == 1:
            return np.array([self.t_p_min_us * 1e-6])
        return np.geomspace(self.t_p_min_us, self.t_p_max_us, self.grid_points) * 1e-6


def _require_number(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigValidationError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigValidationError(name, f"must be finite, got {value}")


def _read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = json.load(f)
    except OSError as e:
        raise ConfigValidationError("config", f"cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise ConfigValidationError("config", f"{path} is not valid JSON: {e.msg} (line {e.lineno})") from e
    if not isinstance(content, dict):
        raise ConfigValidationError("config", f"{path} must hold a JSON object")
    return content
