"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: UsageError -> 1, DataError (and its
subclasses) -> 2, NumericError -> 3.
"""


class StormError(Exception):
    """Base class for all toolkit errors."""


class UsageError(StormError):
    """Caller misuse: bad argument values, invalid invocation."""


class DataError(StormError):
    """Input data failed validation or could not be read."""


class ValidationError(DataError):
    """Structured data violated a documented invariant."""


class ParseError(DataError):
    """A file could not be parsed; message carries the line number."""


class DimensionError(DataError):
    """Array shapes incompatible with the requested operation."""


class NumericError(StormError):
    """A numeric procedure failed (singular matrix, non-finite value)."""
