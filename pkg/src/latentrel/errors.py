"""Exception hierarchy shared across the package."""


class LatentRelError(Exception):
    """Base class for all package errors."""


# -- numerics -----------------------------------------------------------


class DimensionMismatchError(LatentRelError):
    pass


class ShapeMismatchError(LatentRelError):
    pass


class NotPositiveDefiniteError(LatentRelError):
    pass


class NonPositiveStdError(LatentRelError):
    pass


class EmptyInputError(LatentRelError):
    pass


class DivergenceDetectedError(LatentRelError):
    pass


class OptimizerFailedError(LatentRelError):
    pass


# -- limit-state expressions --------------------------------------------


class ExprSyntaxError(LatentRelError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownFunctionError(LatentRelError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown function '{name}' (at position {position})")
        self.name = name
        self.position = position


class IndexOutOfRangeError(LatentRelError):
    def __init__(self, index: int, nr: int):
        super().__init__(f"variable index {index} out of range 1..{nr}")
        self.index = index
        self.nr = nr


class DivisionByZeroError(LatentRelError):
    pass


class NonFiniteResultError(LatentRelError):
    pass


# -- tabular data -------------------------------------------------------


class MalformedRowError(LatentRelError):
    def __init__(self, line: int, message: str = "malformed row"):
        super().__init__(f"{message} (line {line})")
        self.line = line


class NonNumericCellError(LatentRelError):
    def __init__(self, line: int, col: int, cell: str = ""):
        super().__init__(f"non-numeric cell {cell!r} (line {line}, column {col})")
        self.line = line
        self.col = col


# -- networks and genomes -----------------------------------------------


class LengthMismatchError(LatentRelError):
    pass


class NonFinitePredictionError(LatentRelError):
    pass


# -- configuration and artifacts ----------------------------------------


class ConfigError(LatentRelError):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field
        self.message = message


class ArtifactVersionMismatchError(LatentRelError):
    pass
