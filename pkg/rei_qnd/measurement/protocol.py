"""
Non-destructive photon detection by conditional reflection off a spin-cavity system.

The spin basis is (|0>, |1>): |0> is the cavity-resonant state, |1> the
far-detuned one. Rotations are R(theta) = [[cos theta/2, sin theta/2],
[-sin theta/2, cos theta/2]]. The sequence is

    prepare   rho = R(pi/2 + phi_P) |1><1| R^T
    dephase   off-diagonals * exp(-gamma_gs alpha T_p)
    reflect   rho -> K rho K^dagger,  K = diag(r0, r1)
    readout   rho -> R(pi/2 + phi_R)^T rho R(pi/2 + phi_R)

and the photon-present branch ends in |0>. The overall phase convention of
R does not change any population.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..cavity.params import CouplingRates
from ..cavity.reflection import (
    check_bad_cavity_regime,
    pulse_averaged_resonant,
    reflection_coefficient,
)
from ..config.settings import (
    hermiticity_tolerance,
    passivity_tolerance,
    positivity_tolerance,
    small_parameter_limit,
    trace_tolerance,
)
from ..errors import InvalidInputError, NumericalIntegrityError
from ..templates import SMALL_PARAMETER_WARNING_TEMPLATE


logger = logging.getLogger(__name__)

DEFAULT_SUPERPOSITION_MULTIPLIER = 2.0
MAX_ROTATION_ERROR = math.pi / 4


# ==============================================================================
# Inputs
# ==============================================================================

@dataclass(frozen=True)
class ProtocolErrors:
    """Rotation-angle errors of the preparation and readout pulses (rad)."""

    prep_angle_error: float = 0.0
    readout_angle_error: float = 0.0

    def __post_init__(self) -> None:
        for name in ("prep_angle_error", "readout_angle_error"):
            value = getattr(self, name)
            if not abs(value) < MAX_ROTATION_ERROR:
                raise InvalidInputError(f"|{name}| must be < pi/4, got {value}")


@dataclass(frozen=True)
class DephasingPolicy:
    """
    Spin dephasing during the protocol.

    The superposition lives for alpha * T_p; alpha >= 1 because the pulse
    itself lasts about T_p.
    """

    spin_dephasing_rate: float
    superposition_time_multiplier: float = DEFAULT_SUPERPOSITION_MULTIPLIER

    def __post_init__(self) -> None:
        if not self.spin_dephasing_rate >= 0:
            raise InvalidInputError(f"spin_dephasing_rate must be non-negative, got {self.spin_dephasing_rate}")
        if not self.superposition_time_multiplier >= 1:
            raise InvalidInputError(
                f"superposition_time_multiplier must be >= 1, got {self.superposition_time_multiplier}"
            )

    def coherence_factor(self, t_p: float) -> float:
        """exp(-gamma_gs alpha T_p)."""
        return math.exp(-self.spin_dephasing_rate * self.superposition_time_multiplier * t_p)


@dataclass(frozen=True)
class BranchAmplitudes:
    """Pulse reflection amplitudes for the resonant (r0) and detuned (r1) spin states."""

    resonant: complex
    detuned: complex

    def __post_init__(self) -> None:
        for name in ("resonant", "detuned"):
            value = getattr(self, name)
            if abs(value) > 1.0 + passivity_tolerance:
                raise NumericalIntegrityError(f"{name} branch amplitude |r| = {abs(value):.12g} exceeds 1")

    @property
    def kraus(self) -> np.ndarray:
        return np.diag([complex(self.resonant), complex(self.detuned)])


def validate_density_matrix(rho: np.ndarray) -> None:
    """Raise NumericalIntegrityError unless rho is Hermitian, PSD and 0 < tr rho <= 1."""
    if rho.shape != (2, 2):
        raise NumericalIntegrityError(f"expected a 2x2 density matrix, got shape {rho.shape}")
    asymmetry = float(np.max(np.abs(rho - rho.conj().T)))
    if asymmetry > hermiticity_tolerance:
        raise NumericalIntegrityError(f"state is not Hermitian (max deviation {asymmetry:.3e})")
    trace = float(np.trace(rho).real)
    if not 0 < trace <= 1.0 + trace_tolerance:
        raise NumericalIntegrityError(f"state trace {trace:.12g} outside (0, 1]")
    smallest = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if smallest < -positivity_tolerance:
        raise NumericalIntegrityError(f"state has negative eigenvalue {smallest:.3e}")


@dataclass(frozen=True)
class JointConditionalState:
    """2x2 spin density matrix, conditioned on photon presence; unnormalized after reflection."""

    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.array(self.rho, dtype=complex)
        validate_density_matrix(rho)
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def population(self, index: int) -> float:
        return float(self.rho[index, index].real)

    @property
    def coherence(self) -> complex:
        return complex(self.rho[0, 1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho00": self.population(0),
            "rho11": self.population(1),
            "rho01": self.coherence,
            "trace": self.trace,
        }


# ==============================================================================
# Protocol steps
# ==============================================================================

def rotation_matrix(theta: float) -> np.ndarray:
    """R(theta) in the (|0>, |1>) basis."""
    half = 0.5 * theta
    return np.array([
        [math.cos(half), math.sin(half)],
        [-math.sin(half), math.cos(half)],
    ])


def prepare_superposition(errors: ProtocolErrors) -> JointConditionalState:
    """Rotate |1> by pi/2 + phi_P."""
    rotation = rotation_matrix(math.pi / 2 + errors.prep_angle_error)
    ket = rotation @ np.array([0.0, 1.0])
    return JointConditionalState(np.outer(ket, ket).astype(complex))


def dephase(state: JointConditionalState, policy: DephasingPolicy, t_p: float) -> JointConditionalState:
    """Damp the coherences for a superposition time alpha * T_p."""
    if not t_p > 0:
        raise InvalidInputError(f"T_p must be > 0, got {t_p}")
    factor = policy.coherence_factor(t_p)
    rho = state.rho.copy()
    rho[0, 1] *= factor
    rho[1, 0] *= factor
    return JointConditionalState(rho)


def branch_amplitudes(rates: CouplingRates, t_p: float) -> BranchAmplitudes:
    """
    Reflection amplitudes of a Gaussian pulse of duration T_p for both spin states.

    Args:
        rates: System rates; Delta must be > 0
        t_p: Pulse duration

    Returns:
        BranchAmplitudes: r0 from the pulse-averaged narrow feature, r1 from the exact amplitude at delta = 0
    """
    if not rates.detuning > 0:
        raise InvalidInputError(f"off-state detuning must be > 0, got {rates.detuning}")
    # Both expansions need the bad-cavity regime
    check_bad_cavity_regime("resonant", rates.g, rates.kappa, "kappa")
    check_bad_cavity_regime("detuned", rates.g_tilde, min(rates.kappa, rates.detuning), "min(kappa, Delta)")

    # Narrow feature averaged over the pulse; the off branch is flat near delta = 0
    resonant = pulse_averaged_resonant(rates.g, rates.kappa, rates.gamma, t_p)
    detuned = reflection_coefficient(0.0, rates.detuning, rates.g_tilde, rates.kappa, rates.gamma)
    return BranchAmplitudes(resonant=resonant, detuned=detuned)


def apply_conditional_reflection(state: JointConditionalState, amplitudes: BranchAmplitudes) -> JointConditionalState:
    """rho -> K rho K^dagger with K = diag(r0, r1)."""
    kraus = amplitudes.kraus
    return JointConditionalState(kraus @ state.rho @ kraus.conj().T)


def final_rotation(state: JointConditionalState, errors: ProtocolErrors) -> JointConditionalState:
    """Readout pulse with reversed phase, R(pi/2 + phi_R)^T."""
    rotation = rotation_matrix(math.pi / 2 + errors.readout_angle_error)
    return JointConditionalState(rotation.T @ state.rho @ rotation)


def fidelity_exact(state: JointConditionalState, eta_det: float) -> float:
    """F = eta_det * sqrt(rho00)."""
    if not 0 < eta_det <= 1:
        raise InvalidInputError(f"eta_det must lie in (0, 1], got {eta_det}")
    population = state.population(0)
    if population < -positivity_tolerance:
        raise NumericalIntegrityError(f"rho00 = {population:.3e} is negative beyond rounding")
    # Rounding noise inside the positivity tolerance counts as an empty branch
    return eta_det * math.sqrt(max(population, 0.0))


def vacuum_branch_population(
    errors: ProtocolErrors,
    policy: Optional[DephasingPolicy] = None,
    t_p: Optional[float] = None,
) -> float:
    """
    Population of |0> when no photon arrives (false-positive channel).

    Without a photon both branches reflect nothing, so the readout pulse undoes
    the preparation up to rotation errors and dephasing.
    """
    # No photon: the reflection step is the identity
    state = prepare_superposition(errors)
    if policy is not None and t_p is not None:
        state = dephase(state, policy, t_p)
    return final_rotation(state, errors).population(0)


# ==============================================================================
# Closed-form fidelity
# ==============================================================================

@dataclass(frozen=True)
class FidelityLosses:
    """First-order loss terms of the fidelity."""

    reflection: float
    bandwidth: float
    dephasing: float
    rotation: float

    @property
    def total(self) -> float:
        return self.reflection + self.bandwidth + self.dephasing + self.rotation

    def as_dict(self) -> Dict[str, float]:
        return {
            "reflection": self.reflection,
            "bandwidth": self.bandwidth,
            "dephasing": self.dephasing,
            "rotation": self.rotation,
            "total": self.total,
        }


def closed_form_losses(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: ProtocolErrors,
    t_p: float,
) -> FidelityLosses:
    """
    Loss terms kappa gamma / 2g^2, kappa sqrt(ln2) / (2 pi T_p g^2),
    gamma_gs alpha T_p / 4 and (phi_R^2 + phi_P^2) / 8.
    """
    if not t_p > 0:
        raise InvalidInputError(f"T_p must be > 0, got {t_p}")
    if not rates.g > 0:
        raise InvalidInputError(f"g must be > 0, got {rates.g}")
    g_sq = rates.g * rates.g
    losses = FidelityLosses(
        reflection=rates.kappa * rates.gamma / (2.0 * g_sq),
        bandwidth=rates.kappa * math.sqrt(math.log(2.0)) / (2.0 * math.pi * t_p * g_sq),
        dephasing=0.25 * policy.spin_dephasing_rate * policy.superposition_time_multiplier * t_p,
        rotation=(errors.readout_angle_error ** 2 + errors.prep_angle_error ** 2) / 8.0,
    )
    for term, value in losses.as_dict().items():
        if term != "total" and value > small_parameter_limit:
            logger.warning(SMALL_PARAMETER_WARNING_TEMPLATE.format(term=term, value=value, limit=small_parameter_limit))
    return losses


def fidelity_closed_form(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: ProtocolErrors,
    eta_det: float,
    t_p: float,
) -> float:
    """eta_det * (1 - sum of first-order losses)."""
    if not 0 < eta_det <= 1:
        raise InvalidInputError(f"eta_det must lie in (0, 1], got {eta_det}")
    return eta_det * (1.0 - closed_form_losses(rates, policy, errors, t_p).total)


# ==============================================================================
# Full run
# ==============================================================================

@dataclass(frozen=True)
class ProtocolRun:
    """Every intermediate state of one protocol evaluation."""

    t_p: float
    eta_det: float
    amplitudes: BranchAmplitudes
    prepared: JointConditionalState
    dephased: JointConditionalState
    reflected: JointConditionalState
    final: JointConditionalState
    fidelity_exact: float
    fidelity_closed_form: float
    losses: FidelityLosses
    vacuum_population: float
    errors: ProtocolErrors = field(default_factory=ProtocolErrors)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t_p_s": self.t_p,
            "t_p_us": self.t_p * 1e6,
            "eta_det": self.eta_det,
            "prep_angle_error_rad": self.errors.prep_angle_error,
            "readout_angle_error_rad": self.errors.readout_angle_error,
            "r0": self.amplitudes.resonant,
            "r1": self.amplitudes.detuned,
            "states": {
                "prepared": self.prepared.to_dict(),
                "dephased": self.dephased.to_dict(),
                "reflected": self.reflected.to_dict(),
                "final": self.final.to_dict(),
            },
            "fidelity_exact": self.fidelity_exact,
            "fidelity_closed_form": self.fidelity_closed_form,
            "closed_form_losses": self.losses.as_dict(),
            "vacuum_branch_population": self.vacuum_population,
        }


def run_protocol(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: ProtocolErrors,
    eta_det: float,
    t_p: float,
) -> ProtocolRun:
    """
    Prepare, dephase, reflect and rotate, then score the result both ways.

    Args:
        rates: System rates
        policy: Spin dephasing policy
        errors: Rotation-angle errors
        eta_det: Spin readout efficiency
        t_p: Pulse duration

    Returns:
        ProtocolRun: States, amplitudes and both fidelities
    """
    amplitudes = branch_amplitudes(rates, t_p)

    # Spin sequence
    prepared = prepare_superposition(errors)
    dephased = dephase(prepared, policy, t_p)
    reflected = apply_conditional_reflection(dephased, amplitudes)
    final = final_rotation(reflected, errors)

    # Score against the first-order closed form
    exact = fidelity_exact(final, eta_det)
    losses = closed_form_losses(rates, policy, errors, t_p)
    logger.debug(f"Protocol at T_p={t_p:.4g}: F_exact={exact:.6f}, F_closed={eta_det * (1 - losses.total):.6f}")

    return ProtocolRun(
        t_p=t_p,
        eta_det=eta_det,
        amplitudes=amplitudes,
        prepared=prepared,
        dephased=dephased,
        reflected=reflected,
        final=final,
        fidelity_exact=exact,
        fidelity_closed_form=eta_det * (1.0 - losses.total),
        losses=losses,
        vacuum_population=vacuum_branch_population(errors, policy, t_p),
        errors=errors,
    )
