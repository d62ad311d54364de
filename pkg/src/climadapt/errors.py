"""Exception hierarchy.

The CLI maps these onto exit codes: validation problems exit 1, I/O
problems (``OSError``) exit 2 and numerical failures exit 3.
"""


class ClimAdaptError(Exception):
    """Base class for all package errors."""


class ValidationError(ClimAdaptError, ValueError):
    """Input violates a documented invariant or precondition."""


class ConfigError(ValidationError):
    """Invalid configuration document or parameter."""


class FormatError(ValidationError):
    """Malformed CARB1 file.

    Attributes
    ----------
    offset : int
        Byte offset at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class LookupFailure(ValidationError, KeyError):
    """A named band, artifact or column does not exist."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class OrderingError(ValidationError):
    """Timestamps are not strictly increasing."""


class SchemaError(ValidationError):
    """Indicator names do not match the series schema."""


class RangeError(ValidationError):
    """A scalar argument lies outside its allowed range."""


class ShapeError(ValidationError):
    """Array dimensions do not match."""


class EmptyDomainError(ValidationError):
    """No valid pixels or cells to work on."""


class NumericalError(ClimAdaptError, ArithmeticError):
    """Base class for numerical failures."""


class FitError(NumericalError):
    """A least-squares fit is under-determined or degenerate."""


class SolverError(NumericalError):
    """A linear system is singular."""


class TrainingError(NumericalError):
    """Training diverged.

    Attributes
    ----------
    epoch : int
        Epoch at which a non-finite loss was observed.
    """

    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch
