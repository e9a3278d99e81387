"""Exception hierarchy for the koopload pipeline.

Every error raised by the library derives from :class:`KooploadError`, split
into configuration, data, and solver branches so the CLI can map them to
distinct exit codes.
"""


class KooploadError(Exception):
    """Base class for all library errors."""


class ConfigError(KooploadError):
    """Invalid parameter or parameter combination."""


class DataError(KooploadError):
    """Input data violates a precondition."""


class SolverError(KooploadError):
    """A numerical solver failed or returned unusable output."""


class FileError(DataError):
    """Missing or unreadable input file."""


class ParseError(DataError):
    """Unparsable cell in an input file; carries row and column."""

    def __init__(self, row, col, message=""):
        self.row = row
        self.col = col
        super().__init__(f"row {row}, column {col}: {message}" if message
                         else f"unparsable cell at row {row}, column {col}")


class SpacingError(DataError):
    """Timestamps are not uniformly spaced."""


class InsufficientData(DataError):
    """Fewer samples than the operation requires."""


class RangeError(DataError):
    """Train/test index ranges overlap or leave the panel bounds."""


class AlignmentError(DataError):
    """Arrays that must share a station or time axis do not."""


class BandwidthError(ConfigError):
    """A kernel bandwidth came out nonpositive."""


class IsolatedPointError(DataError):
    """A kernel-matrix row is identically zero."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"kernel row {index} is identically zero")


class DegenerateSpectrum(SolverError):
    """Repeated or vanishing eigenvalues where distinct ones are required."""


class TruncationError(SolverError):
    """Fewer finite eigenvalues than requested."""


class IllConditioned(SolverError):
    """An eigenvalue too close to zero for a stable extension."""

    def __init__(self, index, message=""):
        self.index = index
        super().__init__(message or f"eigenvalue {index} too small for extension")


class HistoryError(DataError):
    """An out-of-sample point lacks the full delay history."""


class PairingError(DataError):
    """A mode set is not closed under complex conjugation."""


class FitError(SolverError):
    """Least-squares fit is rank deficient beyond the ridge rescue."""


class DivergenceError(SolverError):
    """Forecast state became non-finite during rollout."""

    def __init__(self, step, message=""):
        self.step = step
        super().__init__(message or f"non-finite forecast state at step {step}")
