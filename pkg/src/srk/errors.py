"""Exception hierarchy shared by all modules."""


class SrkError(Exception):
    """Base class for library errors."""


class DimensionMismatch(SrkError, ValueError):
    pass


class NotPositiveDefinite(SrkError, ArithmeticError):
    pass


class SingularBlock(SrkError, ArithmeticError):
    """``U^T G U`` or ``U^T A U`` is numerically singular."""


class MissingResidualDiag(SrkError, ValueError):
    pass


class EstimatorBreakdown(SrkError, ArithmeticError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


class NonFinite(SrkError, ArithmeticError):
    pass


class NonConvergence(SrkError, ArithmeticError):
    pass


class Diverged(SrkError, ArithmeticError):
    pass


class FactorDrift(SrkError, ArithmeticError):
    pass


class InsufficientData(SrkError, ValueError):
    pass


class ConfigError(SrkError, ValueError):
    pass


class ParseError(SrkError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class EmptyDataset(SrkError, ValueError):
    pass
