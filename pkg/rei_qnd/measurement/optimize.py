"""
Fidelity-optimal pulse duration.

Only the bandwidth loss A/T_p (A = kappa sqrt(ln2) / (2 pi g^2)) and the
dephasing loss gamma_gs alpha T_p / 4 depend on T_p, so the closed-form
fidelity has a single maximum at T_p* = sqrt(4A / (alpha gamma_gs)).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..cavity.params import CouplingRates
from ..config.settings import golden_section_tolerance, unimodality_samples
from ..errors import InvalidInputError, UnboundedOptimumError, UnimodalityError
from ..utils.parallel import run_in_batches
from .protocol import DephasingPolicy, ProtocolErrors, fidelity_closed_form, run_protocol


logger = logging.getLogger(__name__)

OPTIMUM_METHODS = ("closed_form", "golden_section")
OBJECTIVES = ("closed_form", "exact")

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2

DEFAULT_BRACKET_FACTOR = 10.0
MIN_BRACKET_FACTOR = 4.0


@dataclass(frozen=True)
class Optimum:
    """Optimal pulse duration, its fidelity and how it was found."""

    t_p_star: float
    fidelity_star: float
    method: str
    bracket: Tuple[float, float]

    def __post_init__(self) -> None:
        if self.method not in OPTIMUM_METHODS:
            raise InvalidInputError(f"unknown method '{self.method}'; options: {', '.join(OPTIMUM_METHODS)}")
        low, high = self.bracket
        if not low <= self.t_p_star <= high:
            raise InvalidInputError(f"T_p* = {self.t_p_star:.6g} lies outside the bracket [{low:.6g}, {high:.6g}]")
        if not 0 < self.fidelity_star <= 1:
            raise InvalidInputError(
                f"optimal fidelity {self.fidelity_star:.6g} outside (0, 1]; parameters are outside the small-loss regime"
            )

    def to_dict(self) -> dict:
        return {
            "t_p_star_s": self.t_p_star,
            "t_p_star_us": self.t_p_star * 1e6,
            "fidelity_star": self.fidelity_star,
            "method": self.method,
            "bracket_s": list(self.bracket),
        }


def bandwidth_coefficient(rates: CouplingRates) -> float:
    """A = kappa sqrt(ln2) / (2 pi g^2), so the bandwidth loss is A / T_p."""
    if not rates.g > 0:
        raise InvalidInputError(f"g must be > 0, got {rates.g}")
    return rates.kappa * math.sqrt(math.log(2.0)) / (2.0 * math.pi * rates.g ** 2)


def _closed_form_duration(rates: CouplingRates, policy: DephasingPolicy) -> float:
    if not policy.spin_dephasing_rate > 0:
        raise UnboundedOptimumError("gamma_gs = 0: fidelity increases monotonically with T_p, no finite optimum")
    return math.sqrt(
        4.0 * bandwidth_coefficient(rates) / (policy.superposition_time_multiplier * policy.spin_dephasing_rate)
    )


def default_bracket(rates: CouplingRates, policy: DephasingPolicy) -> Tuple[float, float]:
    """[T*/10, 10 T*] around the closed-form optimum."""
    t_star = _closed_form_duration(rates, policy)
    return t_star / DEFAULT_BRACKET_FACTOR, t_star * DEFAULT_BRACKET_FACTOR


def optimal_pulse_duration_closed_form(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: Optional[ProtocolErrors] = None,
    eta_det: float = 1.0,
) -> Optimum:
    """
    Stationary point of the closed-form fidelity.

    Args:
        rates: System rates
        policy: Spin dephasing policy (gamma_gs > 0)
        errors: Rotation errors, only shift the fidelity value
        eta_det: Readout efficiency used for the fidelity value

    Returns:
        Optimum: method "closed_form", bracket [T*/10, 10 T*]
    """
    t_star = _closed_form_duration(rates, policy)
    fidelity = fidelity_closed_form(rates, policy, errors or ProtocolErrors(), eta_det, t_star)
    return Optimum(
        t_p_star=t_star,
        fidelity_star=fidelity,
        method="closed_form",
        bracket=default_bracket(rates, policy),
    )


def _golden_section_max(func: Callable[[float], float], a: float, b: float, tol: float) -> Tuple[float, float]:
    """Interval of width <= tol holding the maximum of a unimodal func on [a, b]."""
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        return a, b

    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = func(c)
    yd = func(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = func(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = func(d)

    if yc > yd:
        return a, d
    return c, b


def _check_unimodal(func: Callable[[float], float], low: float, high: float) -> None:
    """Sample func on a log grid and reject brackets without a single interior peak."""
    log_grid = np.linspace(low, high, unimodality_samples)
    values = np.array([func(x) for x in log_grid])
    peak = int(np.argmax(values))
    if peak == 0 or peak == values.size - 1:
        raise UnimodalityError(
            f"sampled maximum sits at the bracket edge T_p = {math.exp(log_grid[peak]):.4g}; widen the bracket"
        )
    slack = 1e-12 * float(np.max(np.abs(values)))
    steps = np.diff(values)
    if np.any(steps[:peak] < -slack) or np.any(steps[peak:] > slack):
        raise UnimodalityError(f"fidelity is not unimodal over [{math.exp(low):.4g}, {math.exp(high):.4g}]")


def maximize_fidelity(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: Optional[ProtocolErrors] = None,
    eta_det: float = 1.0,
    bracket: Optional[Tuple[float, float]] = None,
    objective: str = "closed_form",
    tolerance: float = golden_section_tolerance,
) -> Optimum:
    """
    Golden-section search for the fidelity maximum in ln T_p.

    Args:
        rates: System rates
        policy: Spin dephasing policy
        errors: Rotation errors
        eta_det: Readout efficiency
        bracket: (low, high) in s; defaults to [T*/10, 10 T*]
        objective: "closed_form" or "exact" (density-matrix fidelity)
        tolerance: Relative tolerance on T_p

    Returns:
        Optimum: method "golden_section"
    """
    if objective not in OBJECTIVES:
        raise InvalidInputError(f"unknown objective '{objective}'; options: {', '.join(OBJECTIVES)}")
    errors = errors or ProtocolErrors()
    t_closed = _closed_form_duration(rates, policy)
    low, high = bracket if bracket is not None else default_bracket(rates, policy)
    if not 0 < low < high:
        raise InvalidInputError(f"bracket must satisfy 0 < low < high, got ({low}, {high})")
    slack = 1.0 + 1e-9
    if low > t_closed / MIN_BRACKET_FACTOR * slack or high < t_closed * MIN_BRACKET_FACTOR / slack:
        raise InvalidInputError(
            f"bracket ({low:.4g}, {high:.4g}) must span the closed-form optimum {t_closed:.4g} by a factor 4 on each side"
        )

    if objective == "closed_form":
        def fidelity(t_p: float) -> float:
            return fidelity_closed_form(rates, policy, errors, eta_det, t_p)
    else:
        def fidelity(t_p: float) -> float:
            return run_protocol(rates, policy, errors, eta_det, t_p).fidelity_exact

    def in_log(log_t: float) -> float:
        return fidelity(math.exp(log_t))

    log_low, log_high = math.log(low), math.log(high)
    _check_unimodal(in_log, log_low, log_high)
    left, right = _golden_section_max(in_log, log_low, log_high, math.log1p(tolerance))
    t_star = math.exp(0.5 * (left + right))
    value = fidelity(t_star)
    logger.info(f"Golden-section optimum ({objective}): T_p*={t_star * 1e6:.4f} us, F*={value:.6f}")
    return Optimum(t_p_star=t_star, fidelity_star=value, method="golden_section", bracket=(low, high))


def fidelity_scan(
    rates: CouplingRates,
    policy: DephasingPolicy,
    errors: Optional[ProtocolErrors],
    eta_det: float,
    t_p_grid: Sequence[float],
) -> List[Tuple[float, float]]:
    """
    Closed-form fidelity at every grid duration.

    Args:
        rates: System rates
        policy: Spin dephasing policy
        errors: Rotation errors
        eta_det: Readout efficiency
        t_p_grid: Positive, strictly increasing durations in s

    Returns:
        List[Tuple[float, float]]: (T_p, F) pairs in grid order
    """
    grid = [float(t_p) for t_p in t_p_grid]
    if not grid:
        raise InvalidInputError("T_p grid is empty")
    if not all(t_p > 0 for t_p in grid):
        raise InvalidInputError("T_p grid must be positive")
    if any(later <= earlier for earlier, later in zip(grid, grid[1:])):
        raise InvalidInputError("T_p grid must be strictly increasing")
    errors = errors or ProtocolErrors()

    values = run_in_batches(
        lambda t_p: fidelity_closed_form(rates, policy, errors, eta_det, t_p),
        grid,
        label="durations",
    )
    return list(zip(grid, values))
