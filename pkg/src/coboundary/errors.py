"""Exception hierarchy shared by the solver modules."""


class CoboundaryError(Exception):
    """Base class for all errors raised by this package."""


class SpecMismatch(CoboundaryError, ValueError):
    """Two fields were combined that live on different discretizations."""


class DomainError(CoboundaryError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class SingularMatrixError(CoboundaryError, ArithmeticError):
    pass


class LogDomainError(DomainError):
    """Matrix logarithm requested outside the ball ``|a - Id| <= 1/2``."""


class NonSolvable(CoboundaryError):
    """The average (k = 0 Fourier block) of the right-hand side is nonzero."""


class FCViolation(CoboundaryError):
    """Right-hand side does not vanish on resonant planes.

    ``order`` is set when the violation was found while solving an
    epsilon-series order by order.
    """

    def __init__(self, message, defect=None, order=None, witness=None):
        super().__init__(message)
        self.defect = defect
        self.order = order
        self.witness = witness


class PreconditionViolation(CoboundaryError):
    """An iteration step was called on data that does not meet its hypotheses.

    ``reason`` is one of ``"order"``, ``"poc"``, ``"smallness"`` or
    ``"identity"``; ``report`` carries the defect report when available.
    """

    def __init__(self, message, reason, report=None):
        super().__init__(message)
        self.reason = reason
        self.report = report


class NoConvergence(CoboundaryError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
