"""Gap probabilities of the Gaussian, Laguerre and Jacobi unitary ensembles.

Four independent routes compute E_2(0; I): a Nystrom discretisation of the
Fredholm determinant, the Tracy-Widom ODE system in the moving endpoint, the
associated Painleve transcendents, and direct random-matrix sampling.
"""

from .ensembles import EnsembleSpec, Kind, make_ensemble
from .errors import GapflowError, NumericalError, ParameterDomainError, SingularityError

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec",
    "GapflowError",
    "Kind",
    "NumericalError",
    "ParameterDomainError",
    "SingularityError",
    "make_ensemble",
]
