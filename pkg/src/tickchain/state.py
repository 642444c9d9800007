"""The one-body correlation matrix C_ij = <c_i^dag c_j> as a state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidSpecError

__all__ = ["CovarianceState"]


@dataclass(eq=False)
class CovarianceState:
    """Fermionic one-body covariance matrix.

    For pure (Slater-determinant) trajectories `n_excitations` holds the
    conserved particle number M and the matrix is a rank-M projector; the
    unconditional steady state is mixed and leaves it as None.
    """

    matrix: np.ndarray
    n_excitations: int | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise InvalidSpecError("covariance matrix must be square")

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    def copy(self) -> "CovarianceState":
        return CovarianceState(self.matrix.copy(), self.n_excitations)

    def validate(self, herm_tol: float = 1e-10, eig_tol: float = 1e-8, purity_tol: float = 1e-6) -> None:
        c = self.matrix
        if np.abs(c - c.conj().T).max() > herm_tol:
            raise InvalidSpecError("covariance matrix not Hermitian within tolerance")
        evals = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
        if evals.min() < -eig_tol or evals.max() > 1.0 + eig_tol:
            raise InvalidSpecError(f"occupancy spectrum [{evals.min():.3e}, {evals.max():.3e}] outside [0, 1]")
        if self.n_excitations is not None:
            if np.abs(c @ c - c).max() > purity_tol:
                raise InvalidSpecError("pure-trajectory covariance is not a projector within tolerance")
            if abs(c.trace().real - self.n_excitations) > purity_tol:
                raise InvalidSpecError("trace does not match the excitation number")

    @classmethod
    def vacuum(cls, n_sites: int) -> "CovarianceState":
        return cls(np.zeros((n_sites, n_sites), dtype=complex), 0)

    @classmethod
    def filled(cls, n_sites: int) -> "CovarianceState":
        return cls(np.eye(n_sites, dtype=complex), n_sites)
