"""Exception hierarchy.

Input problems (bad shapes, malformed JSON, matrices outside the algebra) are
``InputError``; failures of the numerics themselves are ``NumericalError``.
The CLI maps the two families onto different exit codes.
"""


class CartanFlowError(Exception):
    pass


class InputError(CartanFlowError, ValueError):
    pass


class NotInAlgebraError(InputError):
    """A matrix is not (numerically) an element of the requested algebra."""


class NumericalError(CartanFlowError, ArithmeticError):
    pass


class MatrixOverflowError(NumericalError):
    pass


class StepSizeUnderflowError(NumericalError):
    """The fixed-step integrator would need more steps than its budget."""


class SeriesNotConvergedError(NumericalError):
    pass


class DegenerateGeodesicError(NumericalError):
    """Curvature is undefined because the horizontal part vanishes."""
