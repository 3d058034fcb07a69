"""
Steady-state reflection of a one-sided cavity holding a single ion.

The exact amplitude ratio is

    a_out/a_in (delta) = [g^2 + (i delta + i Delta + gamma/2)(i delta - kappa)]
                       / [g^2 + (i delta + i Delta + gamma/2)(i delta + kappa)]

and the dressed-state features are returned as poles
``amplitude / (delta - center - i hwhm)``.

Pulse convention: the input field envelope is exp(-ln2 (t - t0)^2 / (2 T_p^2)),
so the intensity has HWHM T_p and the power spectrum is a Gaussian in delta
with variance ln2 / (2 T_p^2) (``SPECTRAL_VARIANCE_FACTOR / T_p^2``).
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from ..config.settings import (
    clean_bad_cavity_ratio,
    clean_detuning_ratio,
    hard_bad_cavity_ratio,
    passivity_tolerance,
)
from ..errors import InvalidInputError, NumericalIntegrityError, RegimeViolationError
from ..templates import BAD_CAVITY_FLAG_TEMPLATE, PULSE_BANDWIDTH_WARNING_TEMPLATE
from .params import CouplingRates


logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

FEATURE_LABELS = ("cavity_dip", "atomic_peak", "fano")

# Power-spectrum variance of the Gaussian pulse is this factor over T_p^2
SPECTRAL_VARIANCE_FACTOR = math.log(2.0) / 2.0
SPECTRAL_AVERAGE_SIGMAS = 8.0
SPECTRAL_AVERAGE_POINTS = 4001

# 1/T_p above this fraction of g^2/kappa triggers the bandwidth warning
PULSE_BANDWIDTH_WARNING_FRACTION = 0.5


@dataclass(frozen=True)
class ReflectionAmplitude:
    """Complex a_out/a_in at carrier detuning ``detuning`` (rad/s or normalized)."""

    value: complex
    detuning: float

    def __post_init__(self) -> None:
        if abs(self.value) > 1.0 + passivity_tolerance:
            raise NumericalIntegrityError(
                f"reflection amplitude |r| = {abs(self.value):.12g} exceeds 1 at delta = {self.detuning}"
            )

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def phase(self) -> float:
        return math.atan2(self.value.imag, self.value.real)


@dataclass(frozen=True)
class SpectralFeature:
    """
    One dressed-state pole of the reflection spectrum.

    Attributes:
        center: Pole position in delta
        hwhm: Half width at half maximum (> 0)
        amplitude: Complex residue-like prefactor
        label: cavity_dip, atomic_peak or fano
        regime_ok: False when the expansion is used outside its clean regime
    """

    center: float
    hwhm: float
    amplitude: complex
    label: str
    regime_ok: bool = True

    def __post_init__(self) -> None:
        if not self.hwhm > 0:
            raise InvalidInputError(f"{self.label} feature needs hwhm > 0, got {self.hwhm}")
        if self.label not in FEATURE_LABELS:
            raise InvalidInputError(f"unknown feature label '{self.label}'; options: {', '.join(FEATURE_LABELS)}")

    def evaluate(self, delta: ArrayLike) -> ArrayLike:
        """Contribution of this pole at detuning delta."""
        return self.amplitude / (np.asarray(delta, dtype=float) - self.center - 1j * self.hwhm)


def reflection_coefficient(
    delta: ArrayLike,
    detuning: float,
    g_eff: float,
    kappa: float,
    gamma: float,
) -> Union[complex, np.ndarray]:
    """
    Exact steady-state reflection amplitude.

    Args:
        delta: Photon detuning from the cavity (scalar or array)
        detuning: Ion transition detuning Delta from the cavity
        g_eff: g for the resonant state, g_tilde for the off state
        kappa: Cavity HWHM (> 0)
        gamma: Optical dephasing rate (>= 0)

    Returns:
        complex or np.ndarray: a_out/a_in, same shape as delta
    """
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be > 0, got {kappa}")
    delta_arr = np.asarray(delta, dtype=float)

    if g_eff == 0:
        # Atom decoupled: bare lossless cavity
        value = (1j * delta_arr - kappa) / (1j * delta_arr + kappa)
    else:
        atom = 1j * delta_arr + 1j * detuning + gamma / 2.0
        coupling_sq = g_eff * g_eff
        value = (coupling_sq + atom * (1j * delta_arr - kappa)) / (coupling_sq + atom * (1j * delta_arr + kappa))

    if value.ndim == 0:
        return complex(value)
    return value


def check_bad_cavity_regime(expansion: str, coupling: float, smallest_rate: float, condition: str) -> bool:
    """Reject hard violations, flag soft ones. Returns True in the clean regime."""
    if coupling == 0:
        return True
    ratio = smallest_rate / coupling
    if ratio <= hard_bad_cavity_ratio:
        raise RegimeViolationError(
            f"{expansion} expansion needs {condition} > {hard_bad_cavity_ratio:g} g, got ratio {ratio:.4g}"
        )
    if ratio < clean_bad_cavity_ratio:
        logger.warning(BAD_CAVITY_FLAG_TEMPLATE.format(
            expansion=expansion, condition=f"{condition} < {clean_bad_cavity_ratio:g} g", kappa_ratio=ratio
        ))
        return False
    return True


def resonant_partial_fractions(g: float, kappa: float, gamma: float) -> Tuple[SpectralFeature, SpectralFeature]:
    """
    Dressed-state expansion for the cavity-resonant ion (Delta = 0).

    Returns the broad cavity feature (HWHM kappa - g^2/kappa) and the narrow
    atomic feature (HWHM g^2/kappa + gamma/2).
    """
    regime_ok = check_bad_cavity_regime("resonant", g, kappa, "kappa")
    narrow = g * g / kappa
    broad_feature = SpectralFeature(
        center=0.0,
        hwhm=kappa - narrow,
        amplitude=2j * kappa * (1.0 - g * g / kappa ** 2),
        label="cavity_dip",
        regime_ok=regime_ok,
    )
    narrow_feature = SpectralFeature(
        center=0.0,
        hwhm=narrow + gamma / 2.0,
        amplitude=-2j * narrow,
        label="atomic_peak",
        regime_ok=regime_ok,
    )
    return broad_feature, narrow_feature


def detuned_partial_fractions(
    g_tilde: float,
    kappa: float,
    gamma: float,
    detuning: float,
) -> Tuple[SpectralFeature, SpectralFeature]:
    """
    Dressed-state expansion for the far-detuned ion.

    Returns the shifted cavity feature and the Fano feature near delta = -Delta.
    """
    if not detuning > 0:
        raise InvalidInputError(f"detuned expansion needs Delta > 0, got {detuning}")
    regime_ok = check_bad_cavity_regime("detuned", g_tilde, min(kappa, detuning), "min(kappa, Delta)")
    if not detuning > clean_detuning_ratio * gamma:
        logger.warning(f"detuned expansion: Delta = {detuning:.4g} is not >> gamma = {gamma:.4g}")
        regime_ok = False

    shift = g_tilde ** 2 / (detuning ** 2 + kappa ** 2)
    dressing = g_tilde ** 2 / (detuning + 1j * kappa) ** 2
    cavity_feature = SpectralFeature(
        center=detuning * shift,
        hwhm=kappa * (1.0 - shift),
        amplitude=2j * kappa * (1.0 - dressing),
        label="cavity_dip",
        regime_ok=regime_ok,
    )
    fano_feature = SpectralFeature(
        center=-detuning * (1.0 + shift),
        hwhm=gamma / 2.0 + kappa * shift,
        amplitude=2j * kappa * dressing,
        label="fano",
        regime_ok=regime_ok,
    )
    return cavity_feature, fano_feature


def reconstruct(features: Iterable[SpectralFeature], delta: ArrayLike) -> ArrayLike:
    """Sum of 1 and every feature's pole term."""
    total = 1.0 + 0j
    for feature in features:
        total = total + feature.evaluate(delta)
    if np.ndim(total) == 0:
        return complex(total)
    return total


def on_resonance_resonant(g: float, kappa: float, gamma: float) -> complex:
    """Resonant-ion reflection at delta = 0 to first order, 1 - kappa gamma / g^2."""
    if gamma > 0 and not g * g > kappa * gamma:
        raise InvalidInputError(f"needs cooperativity > 1, got {g * g / (kappa * gamma):.4g}")
    if g == 0:
        # Bare cavity
        return complex(-1.0)
    return complex(1.0 - kappa * gamma / (g * g))


def on_resonance_detuned(g_tilde: float, kappa: float, detuning: float) -> complex:
    """Far-detuned reflection at delta = 0 to first order, -1 - 2i g_tilde^2 / (kappa Delta)."""
    if not detuning > 0:
        raise InvalidInputError(
            f"Delta must be > 0, got {detuning}; use on_resonance_resonant for the resonant ion"
        )
    return complex(-1.0, -2.0 * g_tilde ** 2 / (kappa * detuning))


def bandwidth_exponent(g: float, kappa: float, t_p: float) -> float:
    """Finite-bandwidth exponent kappa sqrt(ln 2) / (pi T_p g^2)."""
    if not t_p > 0:
        raise InvalidInputError(f"T_p must be > 0, got {t_p}")
    if not g > 0:
        raise InvalidInputError(f"g must be > 0, got {g}")
    return kappa * math.sqrt(math.log(2.0)) / (math.pi * t_p * g * g)


def pulse_averaged_resonant(g: float, kappa: float, gamma: float, t_p: float) -> complex:
    """
    Resonant reflection of a Gaussian pulse of intensity HWHM T_p.

    Args:
        g: Coupling rate
        kappa: Cavity HWHM
        gamma: Optical dephasing rate
        t_p: Pulse duration (s, or normalized time)

    Returns:
        complex: (1 - kappa gamma / g^2) exp(-kappa sqrt(ln 2) / (pi T_p g^2))
    """
    exponent = bandwidth_exponent(g, kappa, t_p)
    narrow_width = g * g / kappa
    if 1.0 / t_p >= PULSE_BANDWIDTH_WARNING_FRACTION * narrow_width:
        logger.warning(PULSE_BANDWIDTH_WARNING_TEMPLATE.format(
            inverse_pulse=1.0 / t_p, narrow_width=narrow_width
        ))
    return on_resonance_resonant(g, kappa, gamma) * math.exp(-exponent)


def _pulse_spectrum_grid(t_p: float, n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    if not t_p > 0:
        raise InvalidInputError(f"T_p must be > 0, got {t_p}")
    sigma = math.sqrt(SPECTRAL_VARIANCE_FACTOR) / t_p
    deltas = np.linspace(-SPECTRAL_AVERAGE_SIGMAS * sigma, SPECTRAL_AVERAGE_SIGMAS * sigma, n_points)
    weights = np.exp(-0.5 * (deltas / sigma) ** 2)
    return deltas, weights


def pulse_averaged_numeric(
    g_eff: float,
    kappa: float,
    gamma: float,
    t_p: float,
    detuning: float = 0.0,
    n_points: int = SPECTRAL_AVERAGE_POINTS,
) -> complex:
    """Exact amplitude averaged over the Gaussian pulse's power spectrum (mode overlap)."""
    deltas, weights = _pulse_spectrum_grid(t_p, n_points)
    values = reflection_coefficient(deltas, detuning, g_eff, kappa, gamma)
    return complex(np.trapezoid(values * weights, deltas) / np.trapezoid(weights, deltas))


def pulse_energy_reflectance(
    g_eff: float,
    kappa: float,
    gamma: float,
    t_p: float,
    detuning: float = 0.0,
    n_points: int = SPECTRAL_AVERAGE_POINTS,
) -> float:
    """Reflected fraction of a Gaussian pulse's energy, the |r|^2 spectral average."""
    deltas, weights = _pulse_spectrum_grid(t_p, n_points)
    values = reflection_coefficient(deltas, detuning, g_eff, kappa, gamma)
    return float(np.trapezoid(np.abs(values) ** 2 * weights, deltas) / np.trapezoid(weights, deltas))


def narrow_feature_bandwidth(g: float, kappa: float, gamma: float) -> float:
    """HWHM of the narrow resonant feature, g^2/kappa + gamma/2."""
    return g * g / kappa + gamma / 2.0


def spectrum_sweep(
    rates: CouplingRates,
    detuning: float,
    delta_range: Tuple[float, float],
    n_points: int,
    g_eff: Optional[float] = None,
) -> List[ReflectionAmplitude]:
    """
    Sample the exact reflection amplitude uniformly over a detuning range.

    Args:
        rates: System rates (kappa, gamma, couplings)
        detuning: Ion detuning Delta; 0 selects g, otherwise g_tilde
        delta_range: (low, high) photon detuning
        n_points: Number of samples (>= 2)
        g_eff: Explicit coupling, overriding the choice above

    Returns:
        List[ReflectionAmplitude]: Ordered by delta
    """
    if n_points < 2:
        raise InvalidInputError(f"n_points must be >= 2, got {n_points}")
    low, high = delta_range
    if not high > low:
        raise InvalidInputError(f"empty detuning range ({low}, {high})")

    coupling = rates.coupling_for(detuning) if g_eff is None else g_eff
    deltas = np.linspace(low, high, n_points)
    values = reflection_coefficient(deltas, detuning, coupling, rates.kappa, rates.gamma)
    return [ReflectionAmplitude(value=complex(value), detuning=float(delta)) for delta, value in zip(deltas, values)]
