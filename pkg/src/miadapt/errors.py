"""Exception and warning types shared across the package."""


class DimensionError(ValueError):
    """A matrix or vector does not conform to the expected width."""


class EmptyBagError(ValueError):
    """An operation that needs at least one instance received none."""


class EmptyInputError(ValueError):
    """A metric was asked for on an empty score sequence."""


class UndefinedMetricError(ValueError):
    """A ranking metric is undefined for the given labels (single class)."""


class ConfigError(ValueError):
    """A configuration value is outside its documented range."""


class DivergenceError(RuntimeError):
    """The solver left the region where its iterates are meaningful."""


class DataFormatError(ValueError):
    """Base class for problems with files read or written by the package."""


class ParseError(DataFormatError):
    """A malformed cell or header in a CSV file.

    Carries the file path plus a 1-based data row number and the column
    name so the offending cell can be located; row 0 means the header.
    """

    def __init__(self, path, row, column, reason):
        self.path = str(path)
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"{self.path}: row {row}, column {column!r}: {reason}")


class ValidationError(DataFormatError):
    """Cross-record inconsistency in otherwise well-formed files.

    ``offenders`` lists the identifiers that triggered the failure.
    """

    def __init__(self, message, offenders=()):
        self.offenders = tuple(offenders)
        detail = f"{message}: {', '.join(map(str, self.offenders))}" if self.offenders else message
        super().__init__(detail)


class ModelFormatError(DataFormatError):
    """A model file is truncated, has a bad checksum, or a wrong version."""


class StabilityWarning(UserWarning):
    """The quadratic penalty is small relative to the adaptation weight."""
