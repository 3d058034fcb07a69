"""
Physical parameter chain for a single rare-earth ion in a one-sided cavity.

All rates are angular (rad/s). The cavity linewidth kappa is the HWHM,
kappa = omega_c / (2 Q). Optical and spin dephasing rates are 1/T2.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Tuple

from scipy import constants

from ..config.presets import PRESETS, QUOTED_VALUES, SPEC_KEYS, TWO_PI, preset_names
from ..config.settings import discrepancy_threshold
from ..errors import InvalidInputError
from ..templates import DEFAULT_MODE_VOLUME_NOTE, DISCREPANCY_NOTE_TEMPLATE


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants of the parameter chain (fixed, not configurable)."""

    reduced_planck: float = constants.hbar          # J s
    vacuum_permittivity: float = constants.epsilon_0  # F/m
    speed_of_light: float = constants.c             # m/s

    def __post_init__(self) -> None:
        for name in ("reduced_planck", "vacuum_permittivity", "speed_of_light"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")


CODATA = PhysicalConstants()


# ==============================================================================
# Raw inputs
# ==============================================================================

@dataclass(frozen=True)
class CavitySpec:
    """
    Photonic cavity description.

    Attributes:
        wavelength: Resonance wavelength in m
        refractive_index: Refractive index of the host crystal
        quality_factor: Quality factor Q
        mode_volume: Mode volume in m^3, None for (wavelength/n)^3
    """

    wavelength: float
    refractive_index: float
    quality_factor: float
    mode_volume: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.wavelength > 0:
            raise InvalidInputError(f"wavelength must be > 0, got {self.wavelength}")
        if not self.refractive_index >= 1:
            raise InvalidInputError(f"refractive_index must be >= 1, got {self.refractive_index}")
        if not self.quality_factor > 0:
            raise InvalidInputError(f"quality_factor must be > 0, got {self.quality_factor}")
        if self.mode_volume is not None and not self.mode_volume > 0:
            raise InvalidInputError(f"mode_volume must be > 0, got {self.mode_volume}")

    @property
    def effective_mode_volume(self) -> float:
        """Mode volume in m^3 with the (wavelength/n)^3 default applied."""
        if self.mode_volume is None:
            return (self.wavelength / self.refractive_index) ** 3
        return self.mode_volume


@dataclass(frozen=True)
class IonSpec:
    """
    Optical transition of the ion.

    Attributes:
        dipole_moment: Transition dipole moment mu in C m
        optical_dephasing_rate: gamma in rad/s
        detuning_offstate: Delta of the off-resonant transition in rad/s
        coupling_ratio_sq: g_tilde^2 / g^2
        branching_ratio: beta of the cycling transition
    """

    dipole_moment: float
    optical_dephasing_rate: float
    detuning_offstate: float
    coupling_ratio_sq: float
    branching_ratio: float

    def __post_init__(self) -> None:
        if not self.dipole_moment > 0:
            raise InvalidInputError(f"dipole_moment must be > 0, got {self.dipole_moment}")
        if not 0 < self.branching_ratio < 1:
            raise InvalidInputError(f"branching_ratio must lie in (0, 1), got {self.branching_ratio}")
        if not 0 < self.coupling_ratio_sq <= 1:
            raise InvalidInputError(f"coupling_ratio_sq must lie in (0, 1], got {self.coupling_ratio_sq}")
        for name in ("optical_dephasing_rate", "detuning_offstate"):
            if not getattr(self, name) >= 0:
                raise InvalidInputError(f"{name} must be non-negative, got {getattr(self, name)}")


@dataclass(frozen=True)
class SpinSpec:
    """Ground-state spin coherence: gamma_gs in rad/s and T1 in s."""

    spin_dephasing_rate: float
    spin_lifetime: float

    def __post_init__(self) -> None:
        if not self.spin_dephasing_rate >= 0:
            raise InvalidInputError(f"spin_dephasing_rate must be non-negative, got {self.spin_dephasing_rate}")
        if not self.spin_lifetime > 0:
            raise InvalidInputError(f"spin_lifetime must be > 0, got {self.spin_lifetime}")


# ==============================================================================
# Derived quantities
# ==============================================================================

@dataclass(frozen=True)
class DerivedParams:
    """
    Secondary quantities computed from a CavitySpec and IonSpec.

    cavity_linewidth is the HWHM. cooperativity is stored exactly as
    g^2 / (kappa gamma). notes holds provenance and discrepancy strings.
    """

    cavity_angular_frequency: float
    mode_volume: float
    single_photon_field: float
    cavity_linewidth: float
    coupling_rate: float
    cooperativity: float
    purcell_factor: float
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        """Report form with units in the keys."""
        return {
            "cavity_angular_frequency_rad_s": self.cavity_angular_frequency,
            "mode_volume_m3": self.mode_volume,
            "single_photon_field_v_per_m": self.single_photon_field,
            "cavity_linewidth_rad_s": self.cavity_linewidth,
            "cavity_linewidth_hz": self.cavity_linewidth / TWO_PI,
            "coupling_rate_rad_s": self.coupling_rate,
            "coupling_rate_hz": self.coupling_rate / TWO_PI,
            "cooperativity": self.cooperativity,
            "purcell_factor": self.purcell_factor,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class CouplingRates:
    """
    Angular rates of the ion-cavity system, in rad/s or normalized units.

    Attributes:
        g: Coupling of the cavity-resonant transition
        kappa: Cavity HWHM
        gamma: Optical dephasing rate
        detuning: Delta of the off-resonant transition
        coupling_ratio_sq: g_tilde^2 / g^2
    """

    g: float
    kappa: float
    gamma: float
    detuning: float = 0.0
    coupling_ratio_sq: float = 1.0

    def __post_init__(self) -> None:
        if not self.kappa > 0:
            raise InvalidInputError(f"kappa must be > 0, got {self.kappa}")
        if not self.g >= 0:
            raise InvalidInputError(f"g must be non-negative, got {self.g}")
        if not self.gamma >= 0:
            raise InvalidInputError(f"gamma must be non-negative, got {self.gamma}")
        if not self.detuning >= 0:
            raise InvalidInputError(f"detuning must be non-negative, got {self.detuning}")
        if not 0 < self.coupling_ratio_sq <= 1:
            raise InvalidInputError(f"coupling_ratio_sq must lie in (0, 1], got {self.coupling_ratio_sq}")

    @property
    def g_tilde(self) -> float:
        """Coupling of the off-resonant transition."""
        return self.g * math.sqrt(self.coupling_ratio_sq)

    @property
    def cooperativity(self) -> float:
        if self.gamma == 0:
            return math.inf
        return cooperativity(self.g, self.kappa, self.gamma)

    def coupling_for(self, detuning: float) -> float:
        """Coupling seen by a transition at the given detuning (g on resonance, g_tilde otherwise)."""
        return self.g if detuning == 0 else self.g_tilde

    @classmethod
    def normalized(
        cls,
        g: float = 1.0,
        kappa: float = 10.0,
        gamma: float = 0.01,
        detuning: float = 20.0,
        coupling_ratio_sq: float = 1.0,
    ) -> "CouplingRates":
        """Normalized units: g = 1, kappa = 10 g, gamma = 0.01 g, Delta = 20 g."""
        return cls(g=g, kappa=kappa, gamma=gamma, detuning=detuning, coupling_ratio_sq=coupling_ratio_sq)

    @classmethod
    def from_specs(cls, cavity: CavitySpec, ion: IonSpec) -> "CouplingRates":
        field = single_photon_field(cavity)
        return cls(
            g=coupling_rate(ion, field),
            kappa=cavity_linewidth(cavity),
            gamma=ion.optical_dephasing_rate,
            detuning=ion.detuning_offstate,
            coupling_ratio_sq=ion.coupling_ratio_sq,
        )

    def with_values(self, **changes) -> "CouplingRates":
        """Copy with some rates replaced (validated again)."""
        return replace(self, **changes)


@dataclass(frozen=True)
class CavitySystem:
    """A named parameter set with everything derived from it."""

    name: str
    cavity: CavitySpec
    ion: IonSpec
    spin: SpinSpec
    derived: DerivedParams
    rates: CouplingRates


# ==============================================================================
# Parameter chain
# ==============================================================================

def cavity_angular_frequency(spec: CavitySpec) -> float:
    """omega_c = 2 pi c / lambda in rad/s."""
    if not spec.wavelength > 0:
        raise InvalidInputError(f"wavelength must be > 0, got {spec.wavelength}")
    return TWO_PI * CODATA.speed_of_light / spec.wavelength


def single_photon_field(spec: CavitySpec) -> float:
    """
    Vacuum field of one cavity photon, E = sqrt(hbar omega_c / (2 epsilon_0 V)).

    Args:
        spec: Cavity description

    Returns:
        float: Field amplitude in V/m
    """
    volume = spec.effective_mode_volume
    if not volume > 0:
        raise InvalidInputError(f"mode volume must be > 0, got {volume}")
    omega_c = cavity_angular_frequency(spec)
    return math.sqrt(CODATA.reduced_planck * omega_c / (2.0 * CODATA.vacuum_permittivity * volume))


def cavity_linewidth(spec: CavitySpec) -> float:
    """Cavity HWHM kappa = omega_c / (2 Q) in rad/s."""
    return cavity_angular_frequency(spec) / (2.0 * spec.quality_factor)


def coupling_rate(ion: IonSpec, field: float) -> float:
    """Single-photon coupling g = mu E / (2 hbar) in rad/s."""
    if not ion.dipole_moment > 0:
        raise InvalidInputError(f"dipole_moment must be > 0, got {ion.dipole_moment}")
    return ion.dipole_moment * field / (2.0 * CODATA.reduced_planck)


def discrepancy_note(quantity: str, computed: float, quoted: Optional[float]) -> Optional[str]:
    """
    Build a note when a computed value strays from a quoted one.

    Args:
        quantity: Quantity name used in the note
        computed: Value from the formulas
        quoted: Annotated value, or None when nothing is quoted

    Returns:
        Optional[str]: Note text when the relative difference exceeds the threshold
    """
    if quoted is None or quoted == 0:
        return None
    relative = (computed - quoted) / abs(quoted)
    if abs(relative) <= discrepancy_threshold:
        return None
    return DISCREPANCY_NOTE_TEMPLATE.format(
        quantity=quantity, computed=computed, quoted=quoted, relative=relative
    )


def cooperativity(
    g: float,
    kappa: float,
    gamma: float,
    quoted: Optional[float] = None,
    notes: Optional[List[str]] = None,
) -> float:
    """
    Single-ion cooperativity C = g^2 / (kappa gamma).

    Args:
        g: Coupling rate
        kappa: Cavity HWHM
        gamma: Optical dephasing rate
        quoted: Annotated value to compare against, if any
        notes: List that receives a discrepancy note when the quote is off by more than 10%

    Returns:
        float: Cooperativity
    """
    if not kappa > 0:
        raise InvalidInputError(f"kappa must be > 0, got {kappa}")
    if not gamma > 0:
        raise InvalidInputError(f"gamma must be > 0, got {gamma}")
    value = g * g / (kappa * gamma)

    note = discrepancy_note("cooperativity", value, quoted)
    if note is not None:
        logger.warning(note)
        if notes is not None:
            notes.append(note)
    return value


def purcell_factor(spec: CavitySpec) -> float:
    """Purcell factor F_P = (3 / 4 pi^2) (lambda/n)^3 (Q / V)."""
    volume = spec.effective_mode_volume
    if not volume > 0:
        raise InvalidInputError(f"mode volume must be > 0, got {volume}")
    reduced_wavelength_cubed = (spec.wavelength / spec.refractive_index) ** 3
    return 3.0 / (4.0 * math.pi ** 2) * reduced_wavelength_cubed * spec.quality_factor / volume


def dephasing_rate_from_t2(t2: float) -> float:
    """Dephasing rate gamma = 1/T2 in rad/s."""
    if not t2 > 0:
        raise InvalidInputError(f"T2 must be > 0, got {t2}")
    return 1.0 / t2


def derive_params(
    cavity: CavitySpec,
    ion: IonSpec,
    quoted: Optional[Mapping[str, float]] = None,
) -> DerivedParams:
    """
    Run the full parameter chain and record provenance.

    Args:
        cavity: Cavity description
        ion: Ion description
        quoted: Annotated values keyed like DerivedParams fields

    Returns:
        DerivedParams: Derived quantities with notes
    """
    quoted = quoted or {}
    notes: List[str] = []

    if cavity.mode_volume is None:
        notes.append(DEFAULT_MODE_VOLUME_NOTE.format(volume=cavity.effective_mode_volume))

    omega_c = cavity_angular_frequency(cavity)
    field = single_photon_field(cavity)
    kappa = cavity_linewidth(cavity)
    g = coupling_rate(ion, field)
    coop = cooperativity(g, kappa, ion.optical_dephasing_rate, quoted.get("cooperativity"), notes)
    f_p = purcell_factor(cavity)

    # Everything except C: note only, no warning spam
    for quantity, computed in (
        ("mode_volume_m3", cavity.effective_mode_volume),
        ("single_photon_field", field),
        ("cavity_linewidth", kappa),
        ("coupling_rate", g),
        ("purcell_factor", f_p),
    ):
        note = discrepancy_note(quantity, computed, quoted.get(quantity))
        if note is not None:
            notes.append(note)

    return DerivedParams(
        cavity_angular_frequency=omega_c,
        mode_volume=cavity.effective_mode_volume,
        single_photon_field=field,
        cavity_linewidth=kappa,
        coupling_rate=g,
        cooperativity=coop,
        purcell_factor=f_p,
        notes=tuple(notes),
    )


# ==============================================================================
# Presets
# ==============================================================================

def specs_from_values(values: Mapping[str, Any]) -> Tuple[CavitySpec, IonSpec, SpinSpec]:
    """
    Build specs from a flat key/value mapping (preset or override vocabulary).

    Keys ending in ``_hz`` are converted to rad/s.
    """
    unknown = sorted(set(values) - set(SPEC_KEYS))
    if unknown:
        raise InvalidInputError(f"unknown parameter keys: {', '.join(unknown)}")
    missing = sorted(set(SPEC_KEYS) - set(values))
    if missing:
        raise InvalidInputError(f"missing parameter keys: {', '.join(missing)}")

    cavity = CavitySpec(
        wavelength=values["wavelength_m"],
        refractive_index=values["refractive_index"],
        quality_factor=values["quality_factor"],
        mode_volume=values["mode_volume_m3"],
    )
    ion = IonSpec(
        dipole_moment=values["dipole_moment_cm"],
        optical_dephasing_rate=TWO_PI * values["optical_dephasing_rate_hz"],
        detuning_offstate=TWO_PI * values["detuning_offstate_hz"],
        coupling_ratio_sq=values["coupling_ratio_sq"],
        branching_ratio=values["branching_ratio"],
    )
    spin = SpinSpec(
        spin_dephasing_rate=TWO_PI * values["spin_dephasing_rate_hz"],
        spin_lifetime=values["spin_lifetime_s"],
    )
    return cavity, ion, spin


def load_preset(name: str) -> Tuple[CavitySpec, IonSpec, SpinSpec]:
    """
    Return the specs of a named preset.

    Args:
        name: One of nd_yvo4_demonstrated, nd_yvo4_subkelvin, nd_yvo4_theoretical_q

    Returns:
        Tuple[CavitySpec, IonSpec, SpinSpec]
    """
    if name not in PRESETS:
        raise InvalidInputError(f"unknown preset '{name}'; options: {', '.join(preset_names())}")
    return specs_from_values(PRESETS[name])


def build_system(
    name: str,
    cavity: CavitySpec,
    ion: IonSpec,
    spin: SpinSpec,
    quoted: Optional[Mapping[str, float]] = None,
) -> CavitySystem:
    """Derive everything for a parameter set and bundle it."""
    derived = derive_params(cavity, ion, quoted)
    rates = CouplingRates.from_specs(cavity, ion)
    return CavitySystem(name=name, cavity=cavity, ion=ion, spin=spin, derived=derived, rates=rates)


def load_system(name: str) -> CavitySystem:
    """Preset by name, derived, with its quoted values attached as notes."""
    cavity, ion, spin = load_preset(name)
    return build_system(name, cavity, ion, spin, QUOTED_VALUES.get(name))
