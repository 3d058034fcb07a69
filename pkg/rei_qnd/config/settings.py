import os
from dotenv import load_dotenv


# Load .env file
load_dotenv()

_TRUE_STRINGS = ('true', '1', 'yes', 'on')


def _cast(value, var_type):
    """Cast a raw string (or already-typed default) to var_type."""
    if var_type == bool:
        return str(value).lower() in _TRUE_STRINGS
    if var_type in (int, float):
        return var_type(value)
    return value


# Helper: read env var and cast to type
def get_config_value(key: str, default="__REQUIRED__", var_type=str):
    """
    Read an environment variable and cast it.

    Args:
        key: Environment variable name
        default: Value used when unset; "__REQUIRED__" makes the key mandatory
        var_type: Target type (str, int, float or bool)

    Returns:
        The cast value
    """
    value = os.getenv(key)

    if value is None:
        if default == "__REQUIRED__":
            raise ValueError(f"Environment variable {key} is not set. Please check your .env file.")
        # Typed defaults pass through untouched
        if default is None or (var_type != str and not isinstance(default, str)):
            return default
        return _cast(default, var_type)

    return _cast(value, var_type)


# ==============================================================================
# Parallel Processing
# ==============================================================================
# Worker count for fan-out of independent grid points and integrations.
# Changes throughput only; results are assembled in input order.
parallel_num = get_config_value("PARALLEL_NUM", 3, int)
if parallel_num < 1:
    raise ValueError(f"PARALLEL_NUM must be >= 1, got {parallel_num}")

# ==============================================================================
# Physical Validity Tolerances
# ==============================================================================
passivity_tolerance = 1e-9        # |a_out/a_in| <= 1 + tol
hermiticity_tolerance = 1e-12     # max |rho - rho^dagger|
positivity_tolerance = 1e-10      # min eigenvalue >= -tol
trace_tolerance = 1e-9            # trace <= 1 + tol
unit_energy_tolerance = 1e-6      # |input energy - 1| for normalized traces

# ==============================================================================
# Series, Search and Regime Thresholds
# ==============================================================================
series_tail_tolerance = 1e-12     # geometric tail cut for the detection series
series_max_terms = 1_000_000      # longer series switch to the geometric closed form
golden_section_tolerance = 1e-4   # relative tolerance in T_p
unimodality_samples = 33          # log-spaced samples before a bracket search
small_parameter_limit = 0.2       # per-term ceiling of the closed-form fidelity
discrepancy_threshold = 0.10      # quoted-vs-computed note threshold
hard_bad_cavity_ratio = 3.0       # kappa/g below this is rejected
clean_bad_cavity_ratio = 10.0     # kappa/g above this is unflagged
clean_detuning_ratio = 10.0       # Delta/gamma above this is unflagged

# ==============================================================================
# Integration Defaults
# ==============================================================================
steps_per_inverse_kappa = 20.0    # dt <= 1/(20 kappa)
max_integration_steps = 5_000_000
gaussian_support_hwhm = 4.0       # pulse support is center +/- 4 T_p
settle_suppression = 1e4          # transient suppression before reading steady state
ringdown_suppression = 1e6        # decay of stored energy after the pulse

# ==============================================================================
# Audit Thresholds
# ==============================================================================
audit_parameter_threshold = 0.02  # physical parameter chain
audit_probability_threshold = 0.10  # fidelities and efficiencies (via 1 - x)
audit_duration_threshold = 0.10   # optimal pulse durations
