"""Exception hierarchy.

Validation problems (bad inputs, impossible configurations) derive from
:class:`ValidationError`; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the two families to distinct exit codes.
"""


class SEPError(Exception):
    """Base class for all package errors."""


class ValidationError(SEPError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(SEPError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy answer."""


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DiracTarget(ValidationError):
    pass


class SupportOutsideState(ValidationError):
    pass


class OutsideNaturalState(ValidationError):
    pass


class EndpointFinite(ValidationError):
    pass


class MissingDensity(ValidationError):
    pass


class UnknownPreset(ValidationError):
    pass


class NoEmbeddingExists(ValidationError):
    pass


class QuadratureDivergence(NumericalError):
    pass


class NonMonotone(NumericalError):
    pass


class BothSidesInfinite(NumericalError):
    pass


class OutOfRange(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class DegenerateDerivative(NumericalError):
    pass


class EtaZero(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class HorizonExceeded(NumericalError):
    pass
