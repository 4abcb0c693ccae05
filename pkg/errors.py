# errors.py
"""
Exception hierarchy shared by the inputs, analysis and outputs packages.

Two roots map onto the command-line exit codes:

- ``ValidationError`` (exit code 2): the request itself is invalid
  (bad truncation, malformed file, data the chosen control cannot reach).
- ``NumericalError`` (exit code 3): the request is valid but the numerics
  cannot deliver the promised accuracy (coarse grid, ill-conditioned Gram
  matrix, Fourier window too small).
"""


class ControlToolkitError(Exception):
    """Base class for every error raised on purpose by this package."""
    exit_code = 1


class ValidationError(ControlToolkitError, ValueError):
    exit_code = 2


class NumericalError(ControlToolkitError, RuntimeError):
    exit_code = 3


# ---------- validation ----------
class InvalidTruncationError(ValidationError):
    pass


class TruncationMismatchError(ValidationError):
    pass


class InvalidProfileError(ValidationError):
    pass


class DegenerateSigmaError(ValidationError):
    pass


class MeanObstructionError(ValidationError):
    """Dipole controls cannot move the means of position or velocity."""


class UncontrollableModeError(ValidationError):
    """A mode with vanishing profile coefficient carries nonzero data."""


class IndexCoverageError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


# ---------- numerical ----------
class RefinementRequiredError(NumericalError):
    pass


class IllConditionedError(NumericalError):
    pass


class WindowTooSmallError(NumericalError):
    pass


class EvaluationDomainError(NumericalError):
    pass
