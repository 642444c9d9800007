"""Boundary-driven free-fermion clock chains: exact tick statistics,
covariance-matrix trajectory Monte Carlo, closed-form asymptotics, and
coupling optimization."""

__version__ = "0.1.0"

from .chain import (
    ChainSpec,
    EffectiveHamiltonian,
    apply_coupling_disorder,
    apply_onsite_disorder,
    build_effective_hamiltonian,
    stream,
)
from .errors import TickchainError
from .state import CovarianceState

__all__ = [
    "__version__",
    "ChainSpec",
    "EffectiveHamiltonian",
    "CovarianceState",
    "TickchainError",
    "apply_coupling_disorder",
    "apply_onsite_disorder",
    "build_effective_hamiltonian",
    "stream",
]
