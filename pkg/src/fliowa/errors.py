"""Exception hierarchy shared by every fliowa module."""


class FliowaError(Exception):
    """Base class for all library errors."""


class InvalidQuantifierError(FliowaError, ValueError):
    pass


class EmptyAggregationError(FliowaError, ValueError):
    pass


class ShapeError(FliowaError, ValueError):
    pass


class ArityError(FliowaError, ValueError):
    pass


class MissingAccuracyError(FliowaError, ValueError):
    pass


class EmptyDataError(FliowaError, ValueError):
    pass


class EmptyValidationError(EmptyDataError):
    pass


class DivergenceError(FliowaError, ArithmeticError):
    pass


class IDXFormatError(FliowaError, ValueError):
    """Bad magic number or malformed header in an IDX file."""


class IDXConsistencyError(FliowaError, ValueError):
    """Image and label files disagree on the number of items."""


class IDXReadError(FliowaError, OSError):
    """File ended before the payload declared by its header."""


class SplitError(FliowaError, ValueError):
    pass


class PartitionError(FliowaError, ValueError):
    pass


class DerangementError(FliowaError, ValueError):
    pass


class ConfigError(FliowaError, ValueError):
    pass


class RoundError(FliowaError):
    """Wraps a failure raised while executing a given round of learning."""

    def __init__(self, round_index, cause):
        super().__init__(f"round {round_index}: {cause}")
        self.round_index = round_index
        self.cause = cause
