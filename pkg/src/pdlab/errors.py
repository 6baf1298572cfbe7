"""Exception hierarchy shared by all pdlab modules."""


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class SingularityError(DomainError):
    """Point on (or numerically at) the boundary of the simplex."""


class RegimeError(DomainError):
    """Parameters outside the asymptotic regime where an expression is valid."""


class NumericError(ArithmeticError):
    """A numerical kernel failed (non-convergence, non-finite values)."""


class AccuracyError(NumericError):
    """Requested accuracy not reached; ``estimate`` holds the best value found."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class AssemblyError(AccuracyError):
    """Quadrature failure while assembling a finite element matrix."""

    def __init__(self, message, cell, estimate=None, error=None):
        super().__init__(message, estimate, error)
        self.cell = cell
