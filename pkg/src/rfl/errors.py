"""Exception hierarchy.

Three families map onto the CLI exit-code contract: configuration problems
(exit 2), violated preconditions (exit 3) and numerical failures (exit 4).
"""


class RFLError(Exception):
    exit_code = 1


class ConfigParse(RFLError):
    exit_code = 2


class ValidationError(RFLError):
    exit_code = 3


class NumericalFailure(RFLError):
    exit_code = 4


# spectra
class NegativeDensity(ValidationError):
    pass


class PoleOnGrid(ValidationError):
    pass


class UnresolvableLag(ValidationError):
    pass


class MinimalityViolated(ValidationError):
    pass


class ZeroDenominator(ValidationError):
    pass


# problem
class OverlappingGaps(ValidationError):
    pass


class GapTouchesOrigin(ValidationError):
    pass


class GapUnderResolved(ValidationError):
    pass


# operators / filtering
class SingularDensitySum(ValidationError):
    pass


class IllConditioned(NumericalFailure):
    pass


# minimax
class InfeasibleClass(ValidationError):
    pass


class MinimalityLost(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    def __init__(self, message, saddle=None):
        super().__init__(message)
        self.saddle = saddle


# oracle
class EmptyObservationGrid(ValidationError):
    pass
