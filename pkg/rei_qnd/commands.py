"""
Subcommand bodies. Each takes a validated RunConfig and returns a CommandOutput;
``cli.py`` only parses flags and writes the result.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .audit import AUDIT_COLUMNS, audit_derived, build_audit
from .cavity.dynamics import (
    TRACE_COLUMNS,
    IntegrationConfig,
    PulseShape,
    integrate_langevin,
    transfer_function_check,
)
from .cavity.params import CouplingRates
from .cavity.reflection import detuned_partial_fractions, narrow_feature_bandwidth, spectrum_sweep
from .config.presets import TWO_PI, preset_names
from .config.run_config import RunConfig
from .errors import ConfigValidationError
from .measurement.optimize import fidelity_scan
from .measurement.readout import best_readout_efficiency
from .pipeline import ScenarioOptions, run_scenario, run_scenarios


logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ("offstate_detuning_over_g", "delta_over_g", "re", "im", "abs", "phase_rad")

# Off-state detunings of the two spectrum panels, in units of g
SPECTRUM_OFFSTATE_DETUNINGS = (0.0, 20.0)


@dataclass(frozen=True)
class CommandOutput:
    """JSON report plus optional curve rows."""

    report: Dict[str, Any]
    rows: Optional[List[Dict[str, Any]]] = None
    columns: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def has_rows(self) -> bool:
        return self.rows is not None


def scenario_options(config: RunConfig) -> ScenarioOptions:
    return ScenarioOptions(
        alpha=config.alpha,
        p_det=config.p_det,
        n_m=config.n_m,
        errors=config.protocol_errors(),
        rabi_frequency=config.rabi_frequency,
        n_cyc_override=config.n_cyc,
        t_p=config.t_p,
    )


def cmd_derive(config: RunConfig) -> CommandOutput:
    """Parameter chain of one system with its audit entries."""
    system = config.system()
    rates = system.rates
    entries = audit_derived(system)
    report = {
        "preset": system.name,
        "overrides": dict(config.overrides),
        "derived": system.derived.to_dict(),
        "narrow_feature_bandwidth_hz": narrow_feature_bandwidth(rates.g, rates.kappa, rates.gamma) / TWO_PI,
        "audit": [entry.to_dict() for entry in entries],
        "flagged": [entry.quantity for entry in entries if entry.verdict == "flagged"],
    }
    return CommandOutput(report=report)


def cmd_spectrum(config: RunConfig) -> CommandOutput:
    """Reflection spectra of the normalized system (g = 1, kappa = 10, gamma = 0.01)."""
    rows: List[Dict[str, Any]] = []
    fano_centers: Dict[str, float] = {}
    for offstate in SPECTRUM_OFFSTATE_DETUNINGS:
        rates = CouplingRates.normalized(detuning=offstate)
        amplitudes = spectrum_sweep(rates, offstate, (config.delta_min_g, config.delta_max_g), config.points)
        rows.extend(
            {
                "offstate_detuning_over_g": offstate,
                "delta_over_g": amplitude.detuning,
                "re": amplitude.value.real,
                "im": amplitude.value.imag,
                "abs": amplitude.magnitude,
                "phase_rad": amplitude.phase,
            }
            for amplitude in amplitudes
        )
        if offstate > 0:
            _, fano = detuned_partial_fractions(rates.g_tilde, rates.kappa, rates.gamma, offstate)
            fano_centers[str(offstate)] = fano.center

    report = {
        "units": "g",
        "kappa_over_g": 10.0,
        "gamma_over_g": 0.01,
        "points_per_curve": config.points,
        "max_abs": max(row["abs"] for row in rows),
        "fano_center_over_g": fano_centers,
    }
    return CommandOutput(report=report, rows=rows, columns=SPECTRUM_COLUMNS)


def cmd_dynamics(config: RunConfig) -> CommandOutput:
    """Integrate a Gaussian pulse in normalized units and audit it against the steady state."""
    offstate = config.dynamics_offstate_g
    rates = CouplingRates.normalized(detuning=offstate)
    pulse = PulseShape.gaussian(
        config.dynamics_t_p,
        carrier_detuning=config.dynamics_carrier_g,
        peak_amplitude=config.dynamics_amplitude,
    )
    cfg = IntegrationConfig.for_pulse(rates, pulse, detuning=offstate, dt=config.dynamics_dt)
    cfg.check(rates.kappa, pulse)

    logger.info(f"Integrating {cfg.n_steps} steps (dt = {cfg.dt:.4g} / g)")
    trace = integrate_langevin(rates, pulse, cfg, detuning=offstate)

    carriers = [-rates.kappa, -rates.g, 0.0, rates.g, rates.kappa]
    checks = transfer_function_check(rates, carriers, detuning=offstate, dt=config.dynamics_dt)

    input_energy = trace.input_energy
    scattered = trace.scattered_energy(rates.gamma)
    has_input = input_energy > 0
    report = {
        "units": "g",
        "rates": {"g": rates.g, "kappa": rates.kappa, "gamma": rates.gamma, "offstate_detuning": offstate},
        "pulse": {
            "t_p": pulse.t_p,
            "peak_amplitude": pulse.peak_amplitude,
            "carrier_detuning": pulse.carrier_detuning,
        },
        "dt": cfg.dt,
        "n_steps": cfg.n_steps,
        "energy": {
            "input": input_energy,
            "output": trace.output_energy,
            "scattered": scattered,
            "stored_at_end": trace.stored_energy,
        },
        "balance_residual": (
            (input_energy - trace.output_energy - scattered - trace.stored_energy) / input_energy
            if has_input else 0.0
        ),
        "scattered_fraction": scattered / input_energy if has_input else None,
        "two_over_cooperativity": 2.0 / rates.cooperativity,
        "transfer_check": [
            {"delta": point.delta, "ratio": point.ratio, "relative_error": point.relative_error}
            for point in checks
        ],
        "transfer_max_relative_error": max(point.relative_error for point in checks),
    }
    return CommandOutput(report=report, rows=trace.to_rows(), columns=TRACE_COLUMNS)


def cmd_protocol(config: RunConfig) -> CommandOutput:
    """Density matrices and fidelities of one protocol run."""
    result = run_scenario(config.system(), scenario_options(config))
    report = {
        "preset": result.system.name,
        "alpha": config.alpha,
        "n_m": config.n_m,
        "p_det": config.p_det,
        "p_cav": result.readout.p_cav,
        "closed_form_optimum": result.closed_form_optimum.to_dict(),
        **result.protocol.to_dict(),
    }
    return CommandOutput(report=report)


def cmd_readout(config: RunConfig) -> CommandOutput:
    """Readout efficiencies, cycle count and false positives."""
    result = run_scenario(config.system(), scenario_options(config))
    best, scheme = best_readout_efficiency(result.readout.p_cav, config.p_det, config.n_m)
    report = {
        "preset": result.system.name,
        "p_det": config.p_det,
        "n_m": config.n_m,
        "best_efficiency": best,
        "best_scheme": scheme,
        **result.readout.to_dict(),
    }
    return CommandOutput(report=report)


def cmd_optimize(config: RunConfig) -> CommandOutput:
    """
    Fidelity against T_p for every preset (or the chosen one) and the optima.

    Scan columns are t_p_us and one fidelity_<preset> column per system.
    """
    if config.preset is None and not config.overrides:
        systems = [config.with_values(preset=name).system() for name in preset_names()]
    else:
        systems = [config.system()]

    options = scenario_options(config)
    results = run_scenarios(systems, options)
    grid = config.t_p_grid()

    columns = ["t_p_us"]
    rows: List[Dict[str, Any]] = [{"t_p_us": float(t_p * 1e6)} for t_p in grid]
    optima: Dict[str, Any] = {}
    for result in results:
        policy = config.dephasing_policy(result.system)
        scan = fidelity_scan(result.system.rates, policy, options.errors, result.detection_efficiency, grid)
        column = f"fidelity_{result.system.name}"
        columns.append(column)
        for row, (_, fidelity) in zip(rows, scan):
            row[column] = fidelity
        optima[result.system.name] = {
            "detection_efficiency": result.detection_efficiency,
            "closed_form": result.closed_form_optimum.to_dict(),
            "golden_section": result.searched_optimum.to_dict(),
            "fidelity_exact_at_optimum": result.fidelity_exact,
            "scan_max": float(np.max([fidelity for _, fidelity in scan])),
        }

    report = {"alpha": config.alpha, "n_m": config.n_m, "p_det": config.p_det, "optima": optima}
    return CommandOutput(report=report, rows=rows, columns=tuple(columns))


def cmd_audit(config: RunConfig) -> CommandOutput:
    """Every quoted figure against its recomputed value."""
    if config.overrides:
        raise ConfigValidationError("overrides", "the audit always recomputes the embedded presets")
    report = build_audit(scenario_options(config))
    return CommandOutput(report=report.to_dict(), rows=report.to_rows(), columns=AUDIT_COLUMNS)


COMMANDS = {
    "derive": cmd_derive,
    "spectrum": cmd_spectrum,
    "dynamics": cmd_dynamics,
    "protocol": cmd_protocol,
    "readout": cmd_readout,
    "optimize": cmd_optimize,
    "audit": cmd_audit,
}

# Commands whose main product is curve data
CURVE_COMMANDS = ("spectrum", "dynamics", "optimize")
