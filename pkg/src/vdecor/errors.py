"""Exception types shared across the package.

ValidationError covers rejected inputs and configuration (CLI exit code 1),
NumericalError covers runtime numerical failures (CLI exit code 2).
"""


class VdecorError(Exception):
    """Base class for all package errors."""


class ValidationError(VdecorError, ValueError):
    """Invalid input data, shapes, or configuration."""


class NotFittedError(ValidationError):
    """Predict was called on a learner that has not been fit."""


class NumericalError(VdecorError, RuntimeError):
    """A numerical routine failed (factorization, non-finite result)."""


class SingularCorrelationError(NumericalError):
    """Correlation submatrix is numerically singular even after jitter.

    Usually signals duplicate locations combined with a zero nugget.
    """
