"""Exception hierarchy shared across the package.

Each error class maps to one CLI exit code so scripted callers can
distinguish bad configuration from numerical breakdown from a rejected
learning phase.
"""


class MlcvqkdError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidParameterError(MlcvqkdError, ValueError):
    """A parameter violates its documented domain (bad V_m, k >= m, ...)."""

    exit_code = 2


class InvalidInputError(MlcvqkdError, ValueError):
    """Structurally bad input data (length mismatch, malformed config)."""

    exit_code = 2


class NumericalDomainError(MlcvqkdError, ArithmeticError):
    """A computation left its physical domain (negative discriminant,
    symplectic eigenvalue below 1 beyond tolerance).

    Carries the offending intermediate values for diagnosis.
    """

    exit_code = 3

    def __init__(self, message, **values):
        self.values = dict(values)
        if values:
            detail = ", ".join(f"{k}={v!r}" for k, v in values.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class LearningRejectedError(MlcvqkdError):
    """State learning failed its quality gate; carries the evaluation report."""

    exit_code = 4

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
