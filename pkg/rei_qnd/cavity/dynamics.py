"""
Time-domain mean-amplitude Langevin equations for the driven cavity and ion.

    da/dt = (-kappa - i delta) a + g s - sqrt(2 kappa) a_in(t)
    ds/dt = -g a + (-gamma/2 - i delta - i Delta) s
    a_out = a_in + sqrt(2 kappa) a

The carrier is absorbed by the rotating frame, so pulses are baseband
envelopes and delta enters only through the coefficients. Setting the time
derivatives to zero with a constant a_in gives

    a_out/a_in = [g^2 - (kappa - i delta) D] / [g^2 + (kappa + i delta) D],
    D = gamma/2 + i delta + i Delta,

which is the steady-state reflection amplitude in ``reflection`` exactly; the
sign of the output relation is fixed to +1 for that reason.

Energy bookkeeping of these equations:
    int |a_in|^2 - int |a_out|^2 = gamma int |s|^2 + (|a|^2 + |s|^2) at the end.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from ..config.settings import (
    gaussian_support_hwhm,
    max_integration_steps,
    ringdown_suppression,
    settle_suppression,
    steps_per_inverse_kappa,
    unit_energy_tolerance,
)
from ..errors import InvalidInputError, StepSizeError
from ..utils.parallel import run_in_batches
from .params import CouplingRates
from .reflection import reflection_coefficient


logger = logging.getLogger(__name__)

PULSE_KINDS = ("gaussian", "flat_top")
INTEGRATION_METHODS = ("rk4",)

# a_out = a_in + OUTPUT_RELATION_SIGN * sqrt(2 kappa) a
OUTPUT_RELATION_SIGN = 1.0

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class PulseShape:
    """
    Input pulse envelope.

    For ``gaussian`` the field is A exp(-ln2 (t - t0)^2 / (2 t_p^2)), so the
    intensity HWHM is t_p. For ``flat_top`` the field is A on
    |t - t0| <= t_p with Gaussian edges of intensity HWHM ``rise_time``.
    """

    kind: str
    t_p: float
    center_time: float
    carrier_detuning: float = 0.0
    peak_amplitude: complex = 1.0
    rise_time: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in PULSE_KINDS:
            raise InvalidInputError(f"unknown pulse kind '{self.kind}'; options: {', '.join(PULSE_KINDS)}")
        if not self.t_p > 0:
            raise InvalidInputError(f"t_p must be > 0, got {self.t_p}")
        if self.kind == "flat_top" and not self.rise_time > 0:
            raise InvalidInputError(f"flat_top pulse needs rise_time > 0, got {self.rise_time}")
        if not self.center_time >= 0:
            raise InvalidInputError(f"center_time must be >= 0, got {self.center_time}")

    @classmethod
    def gaussian(cls, t_p: float, carrier_detuning: float = 0.0, peak_amplitude: complex = 1.0) -> "PulseShape":
        """Gaussian pulse centered so its support starts at t = 0."""
        return cls(
            kind="gaussian",
            t_p=t_p,
            center_time=gaussian_support_hwhm * t_p,
            carrier_detuning=carrier_detuning,
            peak_amplitude=peak_amplitude,
        )

    @classmethod
    def flat_top(
        cls,
        plateau_half_width: float,
        rise_time: float,
        carrier_detuning: float = 0.0,
        peak_amplitude: complex = 1.0,
    ) -> "PulseShape":
        """Flat-top pulse centered so its support starts at t = 0."""
        return cls(
            kind="flat_top",
            t_p=plateau_half_width,
            center_time=plateau_half_width + gaussian_support_hwhm * rise_time,
            carrier_detuning=carrier_detuning,
            peak_amplitude=peak_amplitude,
            rise_time=rise_time,
        )

    @property
    def support_half_width(self) -> float:
        if self.kind == "gaussian":
            return gaussian_support_hwhm * self.t_p
        return self.t_p + gaussian_support_hwhm * self.rise_time

    def envelope(self, times: np.ndarray) -> np.ndarray:
        """Complex input envelope a_in(t)."""
        offset = np.abs(np.asarray(times, dtype=float) - self.center_time)
        if self.kind == "gaussian":
            shape = np.exp(-_LN2 * offset ** 2 / (2.0 * self.t_p ** 2))
        else:
            edge = np.clip(offset - self.t_p, 0.0, None)
            shape = np.exp(-_LN2 * edge ** 2 / (2.0 * self.rise_time ** 2))
        return complex(self.peak_amplitude) * shape


@dataclass(frozen=True)
class IntegrationConfig:
    """
    Fixed-step integration settings.

    Invariants checked against a system by ``check``: dt <= 1/(20 kappa), the
    window [0, t_span] covers the pulse support (>= 8 t_p for a Gaussian), and
    the step count stays under ``max_steps``.
    """

    dt: float
    t_span: float
    method: str = "rk4"
    max_steps: int = max_integration_steps
    output_relation_sign: float = field(default=OUTPUT_RELATION_SIGN, init=False)

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise StepSizeError(f"dt must be > 0, got {self.dt}")
        if not self.t_span > 0:
            raise InvalidInputError(f"t_span must be > 0, got {self.t_span}")
        if self.method not in INTEGRATION_METHODS:
            raise InvalidInputError(f"unknown method '{self.method}'; options: {', '.join(INTEGRATION_METHODS)}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_span / self.dt - 1e-9))

    def check(self, kappa: float, pulse: PulseShape) -> None:
        """Raise before integrating when the settings cannot give a valid trace."""
        bound = 1.0 / (steps_per_inverse_kappa * kappa)
        if self.dt > bound * (1.0 + 1e-12):
            raise StepSizeError(f"dt = {self.dt:.4g} exceeds the stability bound 1/(20 kappa) = {bound:.4g}")
        if self.n_steps > self.max_steps:
            raise StepSizeError(
                f"{self.n_steps} steps exceed max_steps = {self.max_steps}; use normalized units or a shorter window"
            )
        start = pulse.center_time - pulse.support_half_width
        end = pulse.center_time + pulse.support_half_width
        if start < -1e-12 * end or end > self.n_steps * self.dt * (1.0 + 1e-12):
            raise InvalidInputError(
                f"window [0, {self.n_steps * self.dt:.4g}] does not cover the pulse support [{start:.4g}, {end:.4g}]"
            )

    @classmethod
    def for_pulse(
        cls,
        rates: CouplingRates,
        pulse: PulseShape,
        detuning: float = 0.0,
        dt: Optional[float] = None,
        ringdown: bool = True,
    ) -> "IntegrationConfig":
        """
        Window covering the pulse plus the ring-down of the stored excitation.

        Args:
            rates: System rates
            pulse: Input pulse
            detuning: Ion detuning Delta
            dt: Step size, defaults to the stability bound 1/(20 kappa)
            ringdown: Extend the window until stored energy decays by 1e6

        Returns:
            IntegrationConfig
        """
        step = dt if dt is not None else 1.0 / (steps_per_inverse_kappa * rates.kappa)
        span = pulse.center_time + pulse.support_half_width
        if ringdown:
            decay = slowest_decay_rate(rates, detuning, rates.coupling_for(detuning))
            span += math.log(ringdown_suppression) / decay
        return cls(dt=step, t_span=span)


class TransferPoint(NamedTuple):
    delta: float
    ratio: complex
    relative_error: float


@dataclass(frozen=True)
class FieldTrace:
    """Sampled cavity, atom, input and output amplitudes on a uniform grid."""

    times: np.ndarray
    cavity_amplitude: np.ndarray
    atomic_amplitude: np.ndarray
    input_field: np.ndarray
    output_field: np.ndarray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidInputError("a trace needs a 1-D time grid with at least two samples")
        steps = np.diff(times)
        if not np.all(steps > 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise InvalidInputError("trace time grid must be strictly increasing and uniform")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

        for name in ("cavity_amplitude", "atomic_amplitude", "input_field", "output_field"):
            values = np.array(getattr(self, name), dtype=complex)
            if values.shape != times.shape:
                raise InvalidInputError(f"{name} has {values.size} samples, expected {times.size}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def _energy(self, values: np.ndarray) -> float:
        return float(np.trapezoid(np.abs(values) ** 2, self.times))

    @property
    def input_energy(self) -> float:
        return self._energy(self.input_field)

    @property
    def output_energy(self) -> float:
        return self._energy(self.output_field)

    def scattered_energy(self, gamma: float) -> float:
        """Energy lost through atomic dephasing, gamma int |s|^2 dt."""
        return gamma * self._energy(self.atomic_amplitude)

    @property
    def stored_energy(self) -> float:
        """Excitation left in cavity and atom at the last sample."""
        return float(abs(self.cavity_amplitude[-1]) ** 2 + abs(self.atomic_amplitude[-1]) ** 2)

    def scaled(self, factor: float) -> "FieldTrace":
        return FieldTrace(
            times=self.times,
            cavity_amplitude=self.cavity_amplitude * factor,
            atomic_amplitude=self.atomic_amplitude * factor,
            input_field=self.input_field * factor,
            output_field=self.output_field * factor,
        )

    def normalized(self) -> "FieldTrace":
        """Same trace scaled to unit input-pulse energy (the equations are linear)."""
        energy = self.input_energy
        if not energy > 0:
            raise InvalidInputError("cannot normalize a trace with zero input energy")
        return self.scaled(1.0 / math.sqrt(energy))

    def sample_index(self, time: float) -> int:
        return int(np.argmin(np.abs(self.times - time)))

    def ratio_at(self, time: float) -> complex:
        """a_out/a_in at the sample nearest to ``time``."""
        index = self.sample_index(time)
        if self.input_field[index] == 0:
            raise InvalidInputError(f"input field vanishes at t = {self.times[index]:.6g}")
        return complex(self.output_field[index] / self.input_field[index])

    def to_rows(self) -> List[Dict[str, float]]:
        """CSV rows (t, re_a, im_a, re_s, im_s, re_out, im_out); t in the units of the rates."""
        return [
            {
                "t": float(t),
                "re_a": float(a.real),
                "im_a": float(a.imag),
                "re_s": float(s.real),
                "im_s": float(s.imag),
                "re_out": float(out.real),
                "im_out": float(out.imag),
            }
            for t, a, s, out in zip(self.times, self.cavity_amplitude, self.atomic_amplitude, self.output_field)
        ]


TRACE_COLUMNS = ("t", "re_a", "im_a", "re_s", "im_s", "re_out", "im_out")


def slowest_decay_rate(rates: CouplingRates, detuning: float, g_eff: float) -> float:
    """Smallest decay rate among the modes the input drives."""
    if g_eff == 0:
        return rates.kappa
    # Carrier detuning shifts both eigenvalues by the same imaginary amount
    matrix = np.array([
        [-rates.kappa, g_eff],
        [-g_eff, -rates.gamma / 2.0 - 1j * detuning],
    ], dtype=complex)
    decay = float(np.min(-np.linalg.eigvals(matrix).real))
    if not decay > 0:
        raise InvalidInputError("system has an undamped mode; steady state is never reached")
    return decay


def integrate_langevin(
    rates: CouplingRates,
    pulse: PulseShape,
    cfg: IntegrationConfig,
    detuning: float = 0.0,
    g_eff: Optional[float] = None,
) -> FieldTrace:
    """
    Fixed-step RK4 integration from a(0) = s(0) = 0.

    Args:
        rates: System rates (kappa, gamma, couplings)
        pulse: Input pulse; its carrier detuning is delta
        cfg: Step size and window
        detuning: Ion detuning Delta (0 for the resonant ion)
        g_eff: Coupling override; defaults to g for Delta = 0 and g_tilde otherwise

    Returns:
        FieldTrace: Amplitudes on the grid 0, dt, ..., n dt
    """
    cfg.check(rates.kappa, pulse)
    coupling = rates.coupling_for(detuning) if g_eff is None else g_eff

    n_steps = cfg.n_steps
    h = cfg.dt
    half = 0.5 * h
    sixth = h / 6.0
    root = math.sqrt(2.0 * rates.kappa)

    times = h * np.arange(n_steps + 1)
    # Input sampled on the half-step grid keeps RK4 fourth order
    input_half_grid = pulse.envelope(0.5 * h * np.arange(2 * n_steps + 1))
    drive = (root * input_half_grid).tolist()

    # Rotating-frame decay rates of the cavity and ion
    cavity_rate = complex(-rates.kappa, -pulse.carrier_detuning)
    atom_rate = complex(-rates.gamma / 2.0, -(pulse.carrier_detuning + detuning))
    g = float(coupling)

    logger.debug(f"RK4: {n_steps} steps of {h:.4g}, g_eff={g:.4g}, Delta={detuning:.4g}")

    # RK4 step
    a = 0j
    s = 0j
    cavity_values = [a]
    atom_values = [s]
    for u0, um, u1 in zip(drive[0:-1:2], drive[1::2], drive[2::2]):
        k1a = cavity_rate * a + g * s - u0
        k1s = atom_rate * s - g * a
        a2 = a + half * k1a
        s2 = s + half * k1s
        k2a = cavity_rate * a2 + g * s2 - um
        k2s = atom_rate * s2 - g * a2
        a3 = a + half * k2a
        s3 = s + half * k2s
        k3a = cavity_rate * a3 + g * s3 - um
        k3s = atom_rate * s3 - g * a3
        a4 = a + h * k3a
        s4 = s + h * k3s
        k4a = cavity_rate * a4 + g * s4 - u1
        k4s = atom_rate * s4 - g * a4
        a = a + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        s = s + sixth * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        cavity_values.append(a)
        atom_values.append(s)

    cavity = np.array(cavity_values, dtype=complex)
    input_field = input_half_grid[::2]
    # Output field from the input-output relation
    output_field = input_field + cfg.output_relation_sign * root * cavity
    return FieldTrace(
        times=times,
        cavity_amplitude=cavity,
        atomic_amplitude=np.array(atom_values, dtype=complex),
        input_field=input_field,
        output_field=output_field,
    )


def steady_state_ratio(
    rates: CouplingRates,
    delta: float,
    detuning: float = 0.0,
    g_eff: Optional[float] = None,
    dt: Optional[float] = None,
) -> complex:
    """
    Drive a flat-top pulse at carrier delta and read a_out/a_in at the end of the plateau.

    The plateau lasts long enough for transients to decay by ``settle_suppression``.
    """
    coupling = rates.coupling_for(detuning) if g_eff is None else g_eff
    # Settle time from the slowest mode
    settle = math.log(settle_suppression) / slowest_decay_rate(rates, detuning, coupling)
    pulse = PulseShape.flat_top(plateau_half_width=settle / 2.0, rise_time=settle / 16.0, carrier_detuning=delta)
    cfg = IntegrationConfig.for_pulse(rates, pulse, detuning=detuning, dt=dt, ringdown=False)
    trace = integrate_langevin(rates, pulse, cfg, detuning=detuning, g_eff=coupling)
    return trace.ratio_at(pulse.center_time + pulse.t_p)


def transfer_function_check(
    rates: CouplingRates,
    delta_list: Sequence[float],
    detuning: float = 0.0,
    g_eff: Optional[float] = None,
    dt: Optional[float] = None,
) -> List[TransferPoint]:
    """
    Compare integrated steady states against the exact reflection amplitude.

    Args:
        rates: System rates
        delta_list: Carrier detunings to compare (finite)
        detuning: Ion detuning Delta
        g_eff: Coupling override
        dt: Step size, defaults to the stability bound

    Returns:
        List[TransferPoint]: (delta, integrated ratio, relative error), in input order
    """
    deltas = [float(delta) for delta in delta_list]
    if not all(math.isfinite(delta) for delta in deltas):
        raise InvalidInputError("transfer check needs finite detunings")
    coupling = rates.coupling_for(detuning) if g_eff is None else g_eff

    def compare(delta: float) -> TransferPoint:
        ratio = steady_state_ratio(rates, delta, detuning=detuning, g_eff=coupling, dt=dt)
        # Compare against the exact amplitude
        exact = reflection_coefficient(delta, detuning, coupling, rates.kappa, rates.gamma)
        return TransferPoint(delta=delta, ratio=ratio, relative_error=abs(ratio - exact) / abs(exact))

    results = run_in_batches(compare, deltas, label="detunings")
    worst = max((point.relative_error for point in results), default=0.0)
    logger.info(f"Transfer check: {len(results)} detunings, max relative error {worst:.3e}")
    return results


def atomic_excitation_probability(trace: FieldTrace, gamma: float) -> float:
    """
    Fraction of a unit-energy input pulse scattered by the ion, gamma int |s|^2 dt.

    Args:
        trace: Trace normalized to unit input energy (see FieldTrace.normalized)
        gamma: Optical dephasing rate

    Returns:
        float: Scattered fraction
    """
    energy = trace.input_energy
    if abs(energy - 1.0) > unit_energy_tolerance:
        raise InvalidInputError(f"trace must be normalized to unit input energy, got {energy:.6g}")
    return trace.scattered_energy(gamma)
