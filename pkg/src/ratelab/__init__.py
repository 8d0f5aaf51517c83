"""Entangling and mixing rates of bipartite Hamiltonians.

The package is organised around four layers:

* :mod:`ratelab.linalg` -- Hermitian matrix functions, norms, partial traces.
* :mod:`ratelab.entangling` -- entangling rate of pure bipartite states.
* :mod:`ratelab.mixing` -- two-state ensembles and their mixing rate.
* :mod:`ratelab.solver` -- alternating maximization of the mixing rate.

:mod:`ratelab.verify` and :mod:`ratelab.cli` build the verification suites
and the ``ratelab`` command on top of them.
"""

from ratelab.config import DEFAULT_TOLERANCES, Tolerances
from ratelab.errors import (
    DegenerateInputError,
    DimensionMismatchError,
    DomainError,
    InadmissibleError,
    NotBinaryError,
    NotHermitianError,
    RatelabError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOLERANCES",
    "Tolerances",
    "RatelabError",
    "NotHermitianError",
    "DimensionMismatchError",
    "DegenerateInputError",
    "DomainError",
    "InadmissibleError",
    "NotBinaryError",
    "SolverError",
]
