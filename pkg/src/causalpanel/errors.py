"""Exception hierarchy shared by every stage of the pipeline.

Two families map onto the CLI exit codes: ``ValidationError`` (bad input or
configuration, exit 2) and ``NumericalError`` (a well-formed problem the
numerics cannot solve, exit 3).
"""


class CausalPanelError(Exception):
    """Base class for all package errors."""


class ValidationError(CausalPanelError, ValueError):
    """Input data or configuration violates a documented contract."""


class SchemaError(ValidationError):
    pass


class UnknownColumnError(ValidationError):
    pass


class MissingColumnError(ValidationError):
    pass


class MissingCellError(ValidationError):
    pass


class NonFiniteValueError(ValidationError):
    pass


class DuplicateKeyError(ValidationError):
    pass


class DateGapError(ValidationError):
    pass


class TransformError(ValidationError):
    pass


class SplitError(ValidationError):
    pass


class NumericalError(CausalPanelError, ArithmeticError):
    """A numerical routine failed (singular system, no convergence, ...)."""


class RankDeficiencyError(NumericalError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ZeroVarianceError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, iterations=None, max_change=None):
        super().__init__(message)
        self.iterations = iterations
        self.max_change = max_change
