"""Exception hierarchy shared by all modules."""


class DecayProjError(Exception):
    """Base class for library errors."""


class PreconditionError(DecayProjError, ValueError):
    """A numeric precondition of an operation is violated.

    The CLI maps this to exit code 3.
    """

    def __init__(self, operation, message):
        self.operation = operation
        super().__init__(f"{operation}: {message}")


class NotSPDError(PreconditionError):
    """Matrix expected to be symmetric positive definite is not."""


class ConvergenceError(DecayProjError, RuntimeError):
    """An iterative procedure failed to reach its tolerance."""
