"""Exception types shared across the package."""


class TickchainError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class InvalidSpecError(TickchainError):
    """A model specification violates its invariants."""


class DegenerateSpectrumError(TickchainError):
    """Eigenvalues of the effective Hamiltonian are too close for residue
    calculus; callers should fall back to quadrature."""


class NotHurwitzError(TickchainError):
    """Drift matrix has spectrum outside the open left half-plane."""


class ImpossibleJumpError(TickchainError):
    """A jump was requested whose rate vanishes (Pauli blocking)."""


class QuadratureError(TickchainError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class TransmissionBoundError(TickchainError):
    """Raw transmission exceeded 1 by more than the clamp tolerance,
    indicating a broken resolvent solve."""


class NoCrossoverError(TickchainError):
    """The log-linear crossover equation has no solution (noise too large,
    2*pi*D/J >= 1/e)."""


class InsufficientDataError(TickchainError):
    """Not enough samples/ticks for the requested statistic."""
