"""Exception hierarchy.

Every error raised by the package derives from :class:`DpError`. Input and
validation problems additionally derive from :class:`ValueError` so callers
(and the CLI) can map them to a usage error; solver-level negative outcomes
derive from :class:`SolverFailure`.
"""


class DpError(Exception):
    pass


class InvalidInput(DpError, ValueError):
    pass


class SolverFailure(DpError):
    pass


# instance validation
class NonPositiveHorizon(InvalidInput):
    pass


class DanglingStateIndex(InvalidInput):
    pass


class LayerViolation(InvalidInput):
    pass


class EmptyActionSet(InvalidInput):
    pass


class DimensionMismatch(InvalidInput):
    pass


class OverrideTooSmall(InvalidInput):
    pass


class HorizonTooShort(InvalidInput):
    pass


# multiplicative weights
class EllTooSmall(InvalidInput):
    pass


class EpsilonOutOfRange(InvalidInput):
    pass


class CostOutOfRange(InvalidInput):
    pass


class ResidualExceedsEll(DpError):
    pass


# dual oracle
class NegativeWeight(InvalidInput):
    pass


class NotOnSimplex(InvalidInput):
    pass


# solver
class SigmaOutOfRange(InvalidInput):
    pass


class AllInfeasible(SolverFailure):
    pass


class ExtractionBelowThreshold(SolverFailure):
    pass


class ExtractionFailed(SolverFailure):
    pass


# encoders
class GraphTooSmall(InvalidInput):
    pass


class NotHamiltonian(DpError):
    pass


class TooLarge(InvalidInput):
    pass


class TraceMismatch(InvalidInput):
    pass
