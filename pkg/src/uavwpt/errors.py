"""Exception hierarchy shared by every module of the package."""


class UavWptError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(UavWptError, ValueError):
    pass


class ChargingError(UavWptError):
    """The wireless link cannot recharge the UAV under the given parameters."""


class ThresholdUnreachableError(ChargingError):
    pass


class DegenerateGeometryError(ChargingError):
    pass


class CannotChargeError(ChargingError):
    pass


class InfeasibleRouteError(UavWptError):
    def __init__(self, message, sortie=None):
        super().__init__(message)
        self.sortie = sortie


class InfeasibleInstanceError(UavWptError):
    pass


class DeadEndError(UavWptError):
    pass


class NumericalFailureError(UavWptError, ArithmeticError):
    pass


class SizeLimitError(UavWptError):
    pass


class TimeLimitExceeded(UavWptError):
    pass
