"""Exception hierarchy shared by all fspda modules.

Two broad families matter for the CLI exit-code contract: ``DataError``
(malformed input, bad configuration) maps to exit code 2, and
``NumericError`` (rank deficiency, degenerate variance) maps to exit code 3.
"""


class FspdaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(FspdaError):
    """Invalid input data or configuration (CLI exit code 2)."""


class NumericError(FspdaError):
    """Numerical degeneracy encountered during estimation (CLI exit code 3)."""


# --- numeric degeneracy -------------------------------------------------

class RankDeficientError(NumericError):
    """Design matrix is numerically rank deficient."""


class NonPositiveLrvError(NumericError):
    """Long-run variance estimate is not positive; inference is degenerate."""


class InfeasibleError(NumericError):
    """Every candidate subset was rank deficient."""


class CombinatorialExplosionError(DataError):
    """Exhaustive enumeration would exceed the configured guard."""


# --- contract violations ------------------------------------------------

class DimensionMismatchError(DataError):
    """Array shapes are inconsistent."""


class EmptySetError(DataError):
    """A nonempty index set was required."""


class InvalidIndexError(DataError):
    """An index does not refer to a valid control unit."""


class IndexOutOfRangeError(DataError):
    """A step or position index lies outside the allowed range."""


class InvalidPanelError(DataError):
    """Panel data violate a structural invariant."""


class EmptyPathError(DataError):
    """A nonempty selection path was required."""


# --- file and configuration parsing -------------------------------------

class ParseError(DataError):
    """Malformed CSV content; message carries the row/column location."""


class MissingColumnError(DataError):
    """A named column is absent from the input file."""


class NonFiniteValueError(DataError):
    """A cell holds a missing or non-finite value; message names the cell."""


class TreatmentMarkerNotFoundError(DataError):
    """The treatment period label does not occur in the input file."""


class TooFewRowsError(DataError):
    """Not enough pre- or post-treatment rows to estimate anything."""


class ConfigError(DataError):
    """A scenario or request field is missing or invalid."""
