import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .cavity.params import CavitySystem, discrepancy_note
from .cavity.reflection import narrow_feature_bandwidth
from .config.presets import QUOTED_VALUES, TWO_PI
from .measurement.optimize import Optimum, maximize_fidelity, optimal_pulse_duration_closed_form
from .measurement.protocol import DephasingPolicy, ProtocolErrors, ProtocolRun, run_protocol
from .measurement.readout import ReadoutReport, ReadoutSpec, cavity_emission_probability, readout_report
from .utils.parallel import run_in_batches


logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 2.0
DEFAULT_DETECTOR_EFFICIENCY = 0.9
DEFAULT_MIN_PHOTONS = 2


@dataclass(frozen=True)
class ScenarioOptions:
    """Protocol and readout choices shared by every preset of a run."""

    alpha: float = DEFAULT_ALPHA
    p_det: float = DEFAULT_DETECTOR_EFFICIENCY
    n_m: int = DEFAULT_MIN_PHOTONS
    errors: ProtocolErrors = field(default_factory=ProtocolErrors)
    rabi_frequency: Optional[float] = None
    n_cyc_override: Optional[float] = None
    t_p: Optional[float] = None


@dataclass(frozen=True)
class ScenarioResult:
    """Everything the pipeline computes for one parameter set."""

    system: CavitySystem
    options: ScenarioOptions
    readout: ReadoutReport
    detection_efficiency: float
    closed_form_optimum: Optimum
    searched_optimum: Optimum
    protocol: ProtocolRun
    notes: Tuple[str, ...]

    @property
    def fidelity_exact(self) -> float:
        return self.protocol.fidelity_exact

    def to_dict(self) -> Dict[str, Any]:
        return {
            "preset": self.system.name,
            "derived": self.system.derived.to_dict(),
            "narrow_feature_bandwidth_hz": narrow_feature_bandwidth(
                self.system.rates.g, self.system.rates.kappa, self.system.rates.gamma
            ) / TWO_PI,
            "readout": self.readout.to_dict(),
            "detection_efficiency": self.detection_efficiency,
            "alpha": self.options.alpha,
            "closed_form_optimum": self.closed_form_optimum.to_dict(),
            "golden_section_optimum": self.searched_optimum.to_dict(),
            "protocol": self.protocol.to_dict(),
            "notes": list(self.notes),
        }


def _scenario_notes(result_values: Mapping[str, float], quoted: Mapping[str, float], base: Sequence[str]) -> Tuple[str, ...]:
    notes: List[str] = list(base)
    for quantity, computed in result_values.items():
        note = discrepancy_note(quantity, computed, quoted.get(quantity))
        if note is not None and note not in notes:
            notes.append(note)
    return tuple(notes)


def run_scenario(system: CavitySystem, options: Optional[ScenarioOptions] = None) -> ScenarioResult:
    """
    Chain readout, optimal pulse duration and the exact protocol for one system.

    Args:
        system: Derived parameter set (see load_system)
        options: Protocol and readout choices

    Returns:
        ScenarioResult: Readout report, both optima, the protocol run at T_p and notes
    """
    options = options or ScenarioOptions()
    logger.info("=" * 50)
    logger.info(f"Scenario: {system.name}")
    logger.info("=" * 50)

    rates = system.rates
    rabi = options.rabi_frequency if options.rabi_frequency is not None else rates.gamma
    spec = ReadoutSpec(
        branching_ratio=system.ion.branching_ratio,
        purcell_factor=system.derived.purcell_factor,
        detector_efficiency=options.p_det,
        min_photons=options.n_m,
        rabi_frequency=rabi,
        n_cyc_override=options.n_cyc_override,
    )
    readout = readout_report(
        spec,
        detuning=rates.detuning,
        coupling_ratio_sq=rates.coupling_ratio_sq,
        spin_lifetime=system.spin.spin_lifetime,
        n_m_values=sorted({*range(1, 7), int(options.n_m)}),
    )
    eta_det = readout.efficiencies[int(options.n_m)]

    policy = DephasingPolicy(system.spin.spin_dephasing_rate, options.alpha)
    closed = optimal_pulse_duration_closed_form(rates, policy, options.errors, eta_det)
    searched = maximize_fidelity(rates, policy, options.errors, eta_det, bracket=closed.bracket)
    t_p = options.t_p if options.t_p is not None else closed.t_p_star
    run = run_protocol(rates, policy, options.errors, eta_det, t_p)

    quoted = QUOTED_VALUES.get(system.name, {})
    notes = _scenario_notes(
        {
            "cavity_emission_probability": cavity_emission_probability(
                system.ion.branching_ratio, system.derived.purcell_factor
            ),
            "detection_efficiency": eta_det,
            "optimal_pulse_duration": closed.t_p_star,
        },
        quoted,
        system.derived.notes,
    )
    for note in notes[len(system.derived.notes):]:
        logger.warning(note)

    logger.info(
        f"{system.name}: eta_det={eta_det:.5f}, T_p*={closed.t_p_star * 1e6:.3f} us, "
        f"F_closed={closed.fidelity_star:.5f}, F_exact={run.fidelity_exact:.5f}"
    )
    return ScenarioResult(
        system=system,
        options=options,
        readout=readout,
        detection_efficiency=eta_det,
        closed_form_optimum=closed,
        searched_optimum=searched,
        protocol=run,
        notes=notes,
    )


def run_scenarios(systems: Sequence[CavitySystem], options: Optional[ScenarioOptions] = None) -> List[ScenarioResult]:
    """Run several systems concurrently; results keep the input order."""
    logger.info(f"Running {len(systems)} scenarios")
    return run_in_batches(lambda system: run_scenario(system, options), list(systems), label="scenarios")
