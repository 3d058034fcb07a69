"""
Embedded Nd:YVO4 parameter sets.

Keys use the same vocabulary as the ``overrides`` object of a run config.
Keys ending in ``_hz`` hold ordinary frequencies and are multiplied by 2*pi
when the specs are built. ``mode_volume_m3 = None`` means (wavelength/n)^3.
"""

import math
from typing import Any, Dict


TWO_PI = 2.0 * math.pi

# ==============================================================================
# Override vocabulary
# ==============================================================================
SPEC_KEYS = (
    "wavelength_m",
    "refractive_index",
    "quality_factor",
    "mode_volume_m3",
    "dipole_moment_cm",
    "optical_dephasing_rate_hz",
    "detuning_offstate_hz",
    "coupling_ratio_sq",
    "branching_ratio",
    "spin_dephasing_rate_hz",
    "spin_lifetime_s",
)

# ==============================================================================
# Presets
# ==============================================================================
_ND_YVO4_BASE: Dict[str, Any] = {
    "wavelength_m": 879.7e-9,
    "refractive_index": 2.2,
    "quality_factor": 20_000.0,
    "mode_volume_m3": None,
    "dipole_moment_cm": 9.1e-32,
    "optical_dephasing_rate_hz": 5.9e3,
    "detuning_offstate_hz": 30e9,
    "coupling_ratio_sq": 1.0,
    "branching_ratio": 0.104,
    "spin_dephasing_rate_hz": 340.0,
    "spin_lifetime_s": 0.1,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    # Demonstrated cavity, 5 K spin coherence
    "nd_yvo4_demonstrated": dict(_ND_YVO4_BASE),
    # Sub-kelvin spin coherence
    "nd_yvo4_subkelvin": {**_ND_YVO4_BASE, "spin_dephasing_rate_hz": 34.0},
    # Theoretically reachable quality factor, sub-kelvin spin coherence
    "nd_yvo4_theoretical_q": {
        **_ND_YVO4_BASE,
        "quality_factor": 300_000.0,
        "spin_dephasing_rate_hz": 34.0,
    },
}

PRESET_DESCRIPTIONS: Dict[str, str] = {
    "nd_yvo4_demonstrated": "Nd:YVO4, demonstrated Q = 20,000, gamma_gs = 2pi*340 Hz",
    "nd_yvo4_subkelvin": "Nd:YVO4, Q = 20,000, sub-kelvin gamma_gs = 2pi*34 Hz",
    "nd_yvo4_theoretical_q": "Nd:YVO4, theoretical Q = 300,000, gamma_gs = 2pi*34 Hz",
}

# ==============================================================================
# Measured coherence times behind the dephasing rates (rate = 1/T2)
# ==============================================================================
COHERENCE_TIMES_S: Dict[str, float] = {
    "optical_t2_s": 27e-6,
    "spin_t2_s": 471e-6,
}

# ==============================================================================
# Quoted values, annotation only (never used in computation)
# ==============================================================================
# Angular quantities are stored in rad/s.
QUOTED_VALUES: Dict[str, Dict[str, float]] = {
    "nd_yvo4_demonstrated": {
        "mode_volume_m3": 0.064e-18,
        "single_photon_field": 446_229.0,
        "cavity_linewidth": TWO_PI * 8.5e9,
        "optical_dephasing_rate": TWO_PI * 5.9e3,
        "coupling_rate": TWO_PI * 30.6e6,
        "cooperativity": 246.0,
        "purcell_factor": 1520.0,
        "cavity_emission_probability": 0.9985,
        "detection_efficiency": 0.988,
        "spin_dephasing_rate": TWO_PI * 340.0,
        "narrow_feature_bandwidth": TWO_PI * 1.3e6,
        "optimal_pulse_duration": 13e-6,
        "fidelity": 0.934,
        "false_positive_probability": 1e-4,
    },
    "nd_yvo4_subkelvin": {
        "fidelity": 0.953,
    },
    "nd_yvo4_theoretical_q": {
        "cavity_linewidth": TWO_PI * 565e6,
        "cooperativity": 7392.0,
        "purcell_factor": 22_797.0,
        "detection_efficiency": 0.991,
        "optimal_pulse_duration": 11e-6,
        "fidelity": 0.995,
    },
}

# Cycle count the quoted false-positive estimate assumes
QUOTED_CYCLE_COUNT = 116.0


def preset_names() -> tuple:
    """Return the available preset identifiers in a stable order."""
    return tuple(PRESETS)
