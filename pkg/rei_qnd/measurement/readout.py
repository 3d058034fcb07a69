"""
Spin-state readout by cycling the Purcell-enhanced transition.

Each cycle emits into the cavity with probability p_cav; the cycle ends at
the first emission outside it. A readout succeeds when at least n_M of the
emitted photons are detected, each with probability p_det.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.stats import binom

from ..config.settings import series_max_terms, series_tail_tolerance
from ..errors import InvalidInputError


logger = logging.getLogger(__name__)

READOUT_SCHEMES = ("cycling", "pi_transition")
DEFAULT_MIN_PHOTON_RANGE = range(1, 7)
DEFAULT_SIMULATION_TRIALS = 1_000_000


def _check_open_probability(name: str, value: float) -> None:
    if not 0 < value < 1:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {value}")


def _check_min_photons(n_m: int) -> None:
    if isinstance(n_m, bool) or int(n_m) != n_m or n_m < 1:
        raise InvalidInputError(f"n_M must be a positive integer, got {n_m}")


@dataclass(frozen=True)
class ReadoutSpec:
    """
    Readout settings.

    Attributes:
        branching_ratio: beta of the cycling transition
        purcell_factor: F_P
        detector_efficiency: p_det
        min_photons: n_M
        rabi_frequency: Omega in rad/s
        n_cyc_override: Cycle count to use instead of 1/(1 - p_cav)
    """

    branching_ratio: float
    purcell_factor: float
    detector_efficiency: float
    min_photons: int
    rabi_frequency: float
    n_cyc_override: Optional[float] = None

    def __post_init__(self) -> None:
        _check_open_probability("branching_ratio", self.branching_ratio)
        _check_open_probability("detector_efficiency", self.detector_efficiency)
        _check_min_photons(self.min_photons)
        if not self.purcell_factor > 0:
            raise InvalidInputError(f"purcell_factor must be > 0, got {self.purcell_factor}")
        if not self.rabi_frequency >= 0:
            raise InvalidInputError(f"rabi_frequency must be non-negative, got {self.rabi_frequency}")
        if self.n_cyc_override is not None and not self.n_cyc_override > 0:
            raise InvalidInputError(f"n_cyc_override must be > 0, got {self.n_cyc_override}")


def cavity_emission_probability(branching_ratio: float, purcell_factor: float) -> float:
    """p_cav = F_P beta / (1 - beta + F_P beta)."""
    _check_open_probability("branching_ratio", branching_ratio)
    if not purcell_factor > 0:
        raise InvalidInputError(f"purcell_factor must be > 0, got {purcell_factor}")
    enhanced = purcell_factor * branching_ratio
    return enhanced / (1.0 - branching_ratio + enhanced)


def detection_efficiency(p_cav: float, p_det: float, n_m: int) -> float:
    """
    Probability that at least n_M photons are detected during one readout.

    Sums P(n emissions) = p_cav^n (1 - p_cav) times the binomial tail
    P(k >= n_M | n, p_det), in log space, up to n = ceil(ln 1e-12 / ln p_cav).
    Past ``series_max_terms`` terms (p_cav very close to 1) the geometric
    closed form is returned; both are the same quantity.

    Args:
        p_cav: Cavity emission probability per cycle, in (0, 1)
        p_det: Single-photon detection efficiency, in (0, 1]
        n_m: Minimum detected photons

    Returns:
        float: eta_det
    """
    _check_open_probability("p_cav", p_cav)
    if not 0 < p_det <= 1:
        raise InvalidInputError(f"p_det must lie in (0, 1], got {p_det}")
    _check_min_photons(n_m)

    n_max = max(int(n_m), int(math.ceil(math.log(series_tail_tolerance) / math.log(p_cav))))
    if n_max > series_max_terms:
        logger.debug(f"Detection series needs {n_max} terms; using the geometric closed form")
        return detection_efficiency_closed_form(p_cav, p_det, n_m)

    counts = np.arange(1, n_max + 1)
    log_emissions = counts * math.log(p_cav) + math.log1p(-p_cav)
    with np.errstate(divide="ignore"):
        log_tails = binom.logsf(int(n_m) - 1, counts, p_det)
    return float(np.sum(np.exp(log_emissions + log_tails)))


def detection_efficiency_closed_form(p_cav: float, p_det: float, n_m: int) -> float:
    """
    eta_det = r^n_M with r = p_cav p_det / (1 - p_cav + p_cav p_det).

    Detected photons before the cycle ends are geometric with ratio r.
    """
    _check_open_probability("p_cav", p_cav)
    if not 0 < p_det <= 1:
        raise InvalidInputError(f"p_det must lie in (0, 1], got {p_det}")
    _check_min_photons(n_m)
    ratio = p_cav * p_det / (1.0 - p_cav + p_cav * p_det)
    return ratio ** int(n_m)


def simulate_detection_efficiency(
    p_cav: float,
    p_det: float,
    n_m: int,
    trials: int = DEFAULT_SIMULATION_TRIALS,
    seed: Optional[int] = None,
) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of eta_det.

    Returns:
        Tuple[float, float]: (mean, standard error)
    """
    _check_open_probability("p_cav", p_cav)
    if not 0 < p_det <= 1:
        raise InvalidInputError(f"p_det must lie in (0, 1], got {p_det}")
    _check_min_photons(n_m)
    if trials < 2:
        raise InvalidInputError(f"trials must be >= 2, got {trials}")

    rng = np.random.default_rng(seed)
    # Emissions before the first loss: failures before success with success prob 1 - p_cav
    emitted = rng.geometric(1.0 - p_cav, size=trials) - 1
    detected = rng.binomial(emitted, p_det)
    successes = detected >= n_m
    mean = float(np.mean(successes))
    return mean, float(np.std(successes, ddof=1) / math.sqrt(trials))


def best_readout_efficiency(p_cav: float, p_det: float, n_m: int) -> Tuple[float, str]:
    """
    Better of cycling readout and a single pi-transition photon.

    The pi-transition scheme yields eta_det = p_det but only resolves n_M = 1.
    """
    cycling = detection_efficiency(p_cav, p_det, n_m)
    if n_m == 1 and p_det > cycling:
        return p_det, "pi_transition"
    return cycling, "cycling"


def false_positive_probability(
    rabi_frequency: float,
    detuning: float,
    n_cyc: float,
    coupling_ratio_sq: float,
) -> float:
    """
    Off-resonant excitation probability over the readout, |Omega|^2 / Delta^2 n_cyc g_tilde^2/g^2.

    Args:
        rabi_frequency: Omega
        detuning: Delta, same units as Omega
        n_cyc: Number of cycles
        coupling_ratio_sq: g_tilde^2 / g^2

    Returns:
        float: p_off
    """
    if not detuning > 0:
        raise InvalidInputError(f"Delta must be > 0, got {detuning}")
    if not n_cyc > 0:
        raise InvalidInputError(f"n_cyc must be > 0, got {n_cyc}")
    return abs(rabi_frequency) ** 2 / detuning ** 2 * n_cyc * coupling_ratio_sq


def expected_cycles(p_cav: float, n_m: int, override: Optional[float] = None) -> float:
    """Mean number of cycles, 1 / (1 - p_cav), unless overridden."""
    _check_open_probability("p_cav", p_cav)
    _check_min_photons(n_m)
    if override is not None:
        if not override > 0:
            raise InvalidInputError(f"n_cyc override must be > 0, got {override}")
        return float(override)
    return 1.0 / (1.0 - p_cav)


def readout_time_budget(n_cyc: float, rabi_frequency: float, spin_lifetime: float) -> Tuple[float, float]:
    """
    Readout duration n_cyc 2 pi / Omega and its fraction of T1.

    Returns:
        Tuple[float, float]: (duration in s, duration / T1)
    """
    if not rabi_frequency > 0:
        raise InvalidInputError(f"Omega must be > 0, got {rabi_frequency}")
    if not spin_lifetime > 0:
        raise InvalidInputError(f"T1 must be > 0, got {spin_lifetime}")
    duration = n_cyc * 2.0 * math.pi / rabi_frequency
    return duration, duration / spin_lifetime


@dataclass(frozen=True)
class ReadoutReport:
    """Readout figures of merit for one parameter set."""

    p_cav: float
    efficiencies: Dict[int, float]
    n_cyc: float
    p_off: float
    rabi_frequency: float
    readout_duration: Optional[float] = None
    lifetime_fraction: Optional[float] = None
    p_leak: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "p_cav": self.p_cav,
            "eta_det": {str(n_m): value for n_m, value in self.efficiencies.items()},
            "n_cyc": self.n_cyc,
            "p_off": self.p_off,
            "rabi_frequency_rad_s": self.rabi_frequency,
        }
        if self.readout_duration is not None:
            report["readout_duration_s"] = self.readout_duration
            report["readout_fraction_of_t1"] = self.lifetime_fraction
        if self.p_leak is not None:
            report["p_leak"] = self.p_leak
        return report


def readout_report(
    spec: ReadoutSpec,
    detuning: float,
    coupling_ratio_sq: float,
    spin_lifetime: Optional[float] = None,
    leak: Optional[Tuple[float, float]] = None,
    n_m_values: Iterable[int] = DEFAULT_MIN_PHOTON_RANGE,
) -> ReadoutReport:
    """
    Evaluate p_cav, eta_det for several n_M, n_cyc and false positives.

    Args:
        spec: Readout settings
        detuning: Off-state Delta (rad/s)
        coupling_ratio_sq: g_tilde^2 / g^2
        spin_lifetime: T1 for the time budget, skipped when None
        leak: (ground-state splitting, polarization-mismatch ratio) of a second channel
        n_m_values: Thresholds to tabulate

    Returns:
        ReadoutReport
    """
    p_cav = cavity_emission_probability(spec.branching_ratio, spec.purcell_factor)
    efficiencies = {
        int(n_m): detection_efficiency(p_cav, spec.detector_efficiency, n_m) for n_m in n_m_values
    }
    n_cyc = expected_cycles(p_cav, spec.min_photons, spec.n_cyc_override)
    p_off = false_positive_probability(spec.rabi_frequency, detuning, n_cyc, coupling_ratio_sq)

    duration = fraction = None
    if spin_lifetime is not None and spec.rabi_frequency > 0:
        duration, fraction = readout_time_budget(n_cyc, spec.rabi_frequency, spin_lifetime)
        if fraction > 1:
            logger.warning(f"readout takes {duration:.3g} s, longer than T1 = {spin_lifetime:.3g} s")

    p_leak = None
    if leak is not None:
        splitting, mismatch = leak
        p_leak = false_positive_probability(spec.rabi_frequency, splitting, n_cyc, mismatch)

    logger.info(f"Readout: p_cav={p_cav:.6f}, n_cyc={n_cyc:.4g}, p_off={p_off:.3e}")
    return ReadoutReport(
        p_cav=p_cav,
        efficiencies=efficiencies,
        n_cyc=n_cyc,
        p_off=p_off,
        rabi_frequency=spec.rabi_frequency,
        readout_duration=duration,
        lifetime_fraction=fraction,
        p_leak=p_leak,
    )
