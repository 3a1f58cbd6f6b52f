"""Exception hierarchy."""


class DaeError(Exception):
    """Base class for all errors raised by daead."""


class SingularEvaluationError(DaeError, ArithmeticError):
    """A series operation hit a domain boundary (zero divisor, sqrt of a
    non-positive constant term, ...)."""


class InsufficientOrderError(DaeError, ValueError):
    pass


class StructureError(DaeError):
    """Residual code is not usable for structural analysis, e.g. it branches
    on values, or offsets disagree with the recorded program."""


class StructurallySingularError(DaeError):
    def __init__(self, message, rows=(), cols=()):
        super().__init__(message)
        self.rows = tuple(rows)
        self.cols = tuple(cols)


class OffsetIterationError(DaeError):
    pass


class TapeUsageError(DaeError):
    pass


class NotSAFriendlyError(DaeError):
    pass


class ConvergenceError(DaeError):
    pass


class ChartFailure(ConvergenceError):
    """The current dummy-derivative chart cannot be solved here."""


class InconsistentInitialConditionError(DaeError):
    def __init__(self, message, worst=()):
        super().__init__(message)
        self.worst = list(worst)


class IntegrationError(DaeError):
    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t = {t:.17g})")
        self.t = t
