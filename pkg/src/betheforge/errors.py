"""Exception types shared by all modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class NumericError(ArithmeticError):
    """A numeric procedure failed or lost accuracy."""


class PoleError(NumericError):
    """Evaluation point too close to a pole."""


class ConvergenceError(NumericError):
    """An iterative solver did not converge."""
