"""Exception taxonomy shared by all modules.

Three broad families map to CLI exit codes: configuration problems (exit 2),
data/IO problems (exit 3) and numerical failures (exit 4).
"""


class VimoError(Exception):
    """Base class for all package errors."""


class ConfigError(VimoError):
    """Invalid or inconsistent configuration (unknown keys, bad values)."""


class DataError(VimoError):
    """Invalid input data or file contents."""


class NumericsError(VimoError):
    """Numerical failure during computation."""


# -- geometry ---------------------------------------------------------------

class DegenerateRotation(NumericsError):
    """6D rotation columns are (near-)parallel; orthonormalization undefined."""


class NotARotation(NumericsError):
    """Matrix fails the orthonormality / determinant check."""


# -- data / sequences -------------------------------------------------------

class SchemaError(DataError):
    """File does not conform to its declared schema."""


class AllMissing(DataError):
    """A joint has no valid observation anywhere in the window."""


class DegenerateScale(DataError):
    """Normalization scale collapses below tolerance."""


class TooShort(DataError):
    """Sequence shorter than the operation requires."""


class TooFew(DataError):
    """Not enough samples for the statistic."""


# -- model / diffusion ------------------------------------------------------

class LengthMismatch(ConfigError):
    """Sequence length outside what the model supports."""


class ShapeMismatch(DataError):
    """Tensor shapes do not agree with the contract."""


class OutOfRange(ConfigError):
    """Scalar argument (e.g. timestep) outside its valid range."""


class BadKind(ConfigError):
    """Unknown enumerated kind (schedule, motion style, ...)."""


class BadRange(ConfigError):
    """Invalid frame interval for a mask."""


class NonFiniteLoss(NumericsError):
    """Training loss became NaN/Inf; carries a diagnostic payload."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CheckpointMismatch(ConfigError):
    """Checkpoint config/format does not match what the caller expects."""


class DimMismatch(DataError):
    """Feature dimensions disagree."""


class NumericalFailure(NumericsError):
    """Matrix computation left its validity envelope (e.g. sqrtm clamp)."""


class EmptyMusic(DataError):
    """Beat alignment requires at least one musical beat."""
