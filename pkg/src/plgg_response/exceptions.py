"""Exception hierarchy shared across the package."""


class PlggError(Exception):
    """Base class for all package errors."""


class DataError(PlggError):
    """Input data is malformed or inconsistent (CLI exit code 3)."""


class ConfigError(PlggError):
    """Run configuration failed validation (CLI exit code 2)."""


class DegenerateError(PlggError):
    """A cohort or split cannot support training (CLI exit code 4)."""


class FormatError(DataError):
    pass


class UnsupportedDatatype(DataError):
    pass


class ShapeError(DataError, ValueError):
    pass


class ModeError(PlggError, ValueError):
    pass


class GridError(DataError):
    """Grids that must be congruent disagree in dims, spacing or orientation."""


class IoError(PlggError, OSError):
    pass


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DisjointnessError(DataError):
    pass


class EmptyRoiError(DataError):
    pass


class RangeError(DataError, ValueError):
    pass


class DuplicateError(DataError):
    pass


class NotFoundError(DataError, KeyError):
    __str__ = Exception.__str__


class MissingProbError(DataError, KeyError):
    __str__ = Exception.__str__


class EmptyEvalError(DataError, ValueError):
    pass


class DegenerateLabelsError(DegenerateError, ValueError):
    pass


class FoldDegenerateError(DegenerateError):
    pass


class CohortTooSmall(DegenerateError):
    pass


class BalanceError(ConfigError, ValueError):
    pass
