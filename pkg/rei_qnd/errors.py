"""
Exception hierarchy for the simulator.

Every error carries the process exit code the CLI uses when it surfaces.
Library code raises these; only ``cli.py`` turns them into exit codes.
"""


class QndError(Exception):
    """Base class for all simulator errors."""

    exit_code = 1


# ==============================================================================
# Validation errors (exit code 2)
# ==============================================================================

class InvalidInputError(QndError, ValueError):
    """An argument violates a documented precondition."""

    exit_code = 2


class ConfigValidationError(InvalidInputError):
    """A run configuration field is unknown or fails its physical invariant."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class RegimeViolationError(InvalidInputError):
    """An approximation was requested outside the regime where it holds."""

    exit_code = 2


class StepSizeError(InvalidInputError):
    """Integration settings break the stability or step-count bound."""

    exit_code = 2


class UnboundedOptimumError(InvalidInputError):
    """The fidelity has no interior maximum in the pulse duration."""

    exit_code = 2


# ==============================================================================
# Numerical integrity errors (exit code 3)
# ==============================================================================

class NumericalIntegrityError(QndError, ArithmeticError):
    """A computed object left its physical domain (positivity, trace, ...)."""

    exit_code = 3


class UnimodalityError(NumericalIntegrityError):
    """Sampled objective is not unimodal over the search bracket."""

    exit_code = 3


# ==============================================================================
# Output errors (exit code 4)
# ==============================================================================

class OutputWriteError(QndError, OSError):
    """Writing a report or curve file failed."""

    exit_code = 4

    def __init__(self, path: str, reason: str) -> None:
        self.path = path
        super().__init__(f"cannot write {path}: {reason}")
