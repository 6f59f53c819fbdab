"""Exception types shared across the solver."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateParameter(SolverError):
    """A coefficient formula hit a vanishing denominator."""


class DimensionMismatch(SolverError):
    """Vector or matrix shapes are inconsistent."""


class SingularMatrix(SolverError):
    """Factorization met a pivot too small to trust."""


class UnknownProblem(SolverError):
    """Requested built-in problem name does not exist."""


class ZeroToleranceDenominator(SolverError):
    """Error norm denominator atol + rtol*|y| vanished for some component."""


class StepsizeUnderflow(SolverError):
    """Step control pushed h below the configured minimum."""


class MaxRejectsExceeded(SolverError):
    """A single step was rejected more times than allowed."""


class NonFiniteState(SolverError):
    """State or right-hand side stopped being finite."""


class PoleProximity(SolverError):
    """Stability function evaluated too close to its pole."""


class ReferenceUnavailable(SolverError):
    """No reference solution could be produced for an order study."""
