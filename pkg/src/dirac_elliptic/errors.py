"""Exception hierarchy.

Configuration and validation problems derive from :class:`ValidationError`;
numerical breakdowns derive from :class:`NumericalError`.  The CLI maps the
first family to exit code 2 and the second to exit code 3.
"""


class DiracEllipticError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(DiracEllipticError, ValueError):
    """A problem or configuration violates a stated condition."""

    def __init__(self, condition, message):
        self.condition = condition
        super().__init__(f"[{condition}] {message}")


class ExponentWindowError(ValidationError):
    """An exponent inequality required by the requested mode fails."""


class DomainError(DiracEllipticError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericalError(DiracEllipticError, ArithmeticError):
    """A numerical procedure could not produce a meaningful value."""


class SingularDataError(NumericalError):
    """Data is not integrable against r^(N-1) near the origin."""


class DecayError(NumericalError):
    """Data decays too slowly for the Green tail integral to converge."""


class EstimateDivergedError(NumericalError):
    """The barrier ratio is unbounded on the grid (exponent window violated)."""


class NoBarrierError(NumericalError):
    """No supersolution scale satisfies the barrier condition."""


class AssemblyError(NumericalError):
    """The weighted mass form cannot be assembled on the grid."""


class EnergyOverflowError(NumericalError):
    """The energy integrand overflowed."""


class GradientError(NumericalError):
    """The Riesz solve for the energy gradient failed."""


class EndpointNotFoundError(NumericalError):
    """No negative-energy endpoint was found along the search ray."""


class OrderingError(ValidationError):
    """Two potentials are not ordered as required."""

    def __init__(self, message):
        super().__init__("V2<=V1", message)


class TestFunctionError(DomainError):
    """A test function does not vanish near the truncation radius."""

    __test__ = False
