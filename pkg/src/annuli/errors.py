"""Exception hierarchy.

The CLI maps :class:`PreconditionError` subclasses to exit code 2 and
:class:`AccuracyError` to exit code 3.
"""


class AnnuliError(Exception):
    """Base class for all library errors."""


class PreconditionError(AnnuliError):
    """An input violates an operation's precondition."""


class GeometryError(PreconditionError):
    pass


class DomainError(PreconditionError):
    """A radius lies at or outside the domain of a metric or map."""


class ParameterError(PreconditionError):
    pass


class RegularityError(PreconditionError):
    pass


class DegeneracyError(PreconditionError):
    """``s*rho(s)`` is constant (or flat at tau); the critical map does not exist."""


class RegimeError(PreconditionError):
    """The annuli are in the wrong regime for the requested operation."""


class FatnessRangeError(RegimeError):
    """r < r*: no Nitsche map exists, use the critical profile instead."""


class OrientationError(PreconditionError):
    pass


class ConfigError(PreconditionError):
    pass


class BracketError(PreconditionError):
    """The supplied bracket does not contain a sign change."""


class UnboundedRootError(PreconditionError):
    pass


class EvaluationError(AnnuliError):
    """An integrand or callback returned a non-finite value inside the domain."""


class AccuracyError(AnnuliError):
    """A numerical kernel did not reach its tolerance.

    ``best`` carries the last estimate and ``err`` its error estimate.
    """

    def __init__(self, message, best=None, err=None):
        super().__init__(message)
        self.best = best
        self.err = err
