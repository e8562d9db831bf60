"""Exception types shared across modules."""


class ErgolockError(Exception):
    pass


class DomainError(ErgolockError, ValueError):
    pass


class NonDifferentiable(ErgolockError, ValueError):
    pass


class OrderTooHigh(ErgolockError, ValueError):
    pass


class NotExpanding(ErgolockError):
    pass


class BranchStructureUnavailable(ErgolockError):
    pass


class NewtonDiverged(ErgolockError):
    pass


class PeriodChanged(ErgolockError):
    pass


class NoCycle(ErgolockError):
    pass


class NotConverged(ErgolockError):
    def __init__(self, message, last_change=None):
        super().__init__(message)
        self.last_change = last_change


class GridMismatch(ErgolockError, ValueError):
    pass


class InvalidInput(ErgolockError, ValueError):
    pass


class ZeroDerivativeAtBoundary(ErgolockError):
    pass


class SearchFailed(ErgolockError):
    pass


class CaseSearchFailed(ErgolockError):
    def __init__(self, message, equation=None, residual=None):
        super().__init__(message)
        self.equation = equation
        self.residual = residual
