"""Exception hierarchy shared by all modules."""


class GaussGMEError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(GaussGMEError, ValueError):
    """Malformed or inconsistent input (shapes, symmetry, weights, enums)."""


class DomainError(InvalidArgumentError):
    """A parameter lies outside the domain where an operation is defined."""


class BracketError(GaussGMEError, ValueError):
    """Bisection bracket endpoints do not have different verdicts."""


class SolverError(GaussGMEError, RuntimeError):
    """The conic solver failed in a way that is not a clean infeasibility."""
