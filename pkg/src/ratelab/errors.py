"""Exception hierarchy."""


class RatelabError(Exception):
    """Base class for every error raised by ratelab."""


class NotHermitianError(RatelabError, ValueError):
    pass


class DimensionMismatchError(RatelabError, ValueError):
    pass


class DegenerateInputError(RatelabError, ValueError):
    """Input is rank deficient in a way the computation cannot handle."""


class DomainError(RatelabError, ValueError):
    """Scalar argument outside the domain of a closed-form expression."""


class InadmissibleError(RatelabError, ValueError):
    """Ensemble data that does not describe a valid pair of states."""


class NotBinaryError(RatelabError, ValueError):
    """Density matrix does not have exactly two distinct eigenvalues."""


class SolverError(RatelabError, RuntimeError):
    """Numerical failure inside an iterative routine.

    ``diagnostics`` carries whatever the failing routine could report
    (residuals, brackets, iteration counts).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
