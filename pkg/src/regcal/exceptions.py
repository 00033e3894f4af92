"""Exception hierarchy for regcal."""


class RegcalError(Exception):
    """Base class for all library errors."""


class NotPositiveDefinite(RegcalError, ArithmeticError):
    pass


class MaxIterationsExceeded(RegcalError):
    """An iterative solver ran out of iterations; ``best`` holds the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateRange(RegcalError, ValueError):
    pass


class DegenerateData(RegcalError, ValueError):
    pass


class DimensionMismatch(RegcalError, ValueError):
    pass


class GridMismatch(RegcalError, ValueError):
    pass


class LengthMismatch(RegcalError, ValueError):
    pass


class EmptyInput(RegcalError, ValueError):
    pass


class TooFewInstances(RegcalError, ValueError):
    pass


class DatasetError(RegcalError):
    pass


class TargetColumnMissing(DatasetError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NonNumericColumn(DatasetError, ValueError):
    def __init__(self, column):
        super().__init__(f"column {column!r} is not numeric")
        self.column = column


class EmptyAfterFiltering(DatasetError, ValueError):
    pass


class ConfigError(RegcalError, ValueError):
    pass
