"""Closed-form infinite-chain results: shifted-Fermi-sea current and
correlators, the Bessel/Si/Ci number variance, the sine-kernel log law,
Thouless localization length, and log-to-linear crossover times."""
from __future__ import annotations

import math
import warnings

from .errors import NoCrossoverError
from .specials import EULER_GAMMA, bessel_j0, bessel_j1, cosine_integral, lambert_w_m1, sine_integral

__all__ = [
    "mean_current_infinite",
    "bulk_correlator",
    "bulk_variance_closed_form",
    "bulk_variance_asymptotic",
    "sine_kernel_number_variance",
    "localization_length",
    "crossover_time",
    "crossover_time_leading",
    "thermal_crossover",
    "disorder_crossover",
    "DisorderRegimeWarning",
]


class DisorderRegimeWarning(UserWarning):
    """The disorder-dominated crossover formula was used outside its
    validity window D/J << (eps/eps0)^2 << 1."""


def mean_current_infinite(g: float) -> float:
    """Stationary current of the infinite perfectly-transmitting chain,
    2g/pi."""
    if g < 0.0:
        raise ValueError("coupling must be >= 0")
    return 2.0 * g / math.pi


def _sinc(x: float) -> float:
    return 1.0 if x == 0.0 else math.sin(x) / x


def bulk_correlator(g: float, tau: float) -> float:
    """Connected two-time correlator of the bulk bond current in the
    shifted Fermi sea:

        (g^2/2) [J0(2 g tau)^2 - J1(2 g tau)^2] - (2 g^2/pi^2) sinc(2 g tau)^2
    """
    if tau < 0.0:
        raise ValueError("tau must be >= 0")
    a = 2.0 * g * tau
    j0 = bessel_j0(a)
    j1 = bessel_j1(a)
    return 0.5 * g * g * (j0 * j0 - j1 * j1) - (2.0 * g * g / math.pi**2) * _sinc(a) ** 2


def bulk_variance_closed_form(g: float, t: float) -> float:
    """Exact finite-time bulk number variance of the infinite chain, in
    Bessel functions and sine/cosine integrals of a = 2 g t."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    a = 2.0 * g * t
    if a == 0.0:
        return 0.0
    j0 = bessel_j0(a)
    j1 = bessel_j1(a)
    bessel_block = 0.25 * a * a * (j0 * j0 + j1 * j1) - 0.25 * a * j0 * j1
    trig_block = (
        math.sin(a) ** 2
        - a * sine_integral(2.0 * a)
        + 0.5 * (math.log(2.0 * a) + EULER_GAMMA - cosine_integral(2.0 * a))
    ) / math.pi**2
    return bessel_block + trig_block


def bulk_variance_asymptotic(g: float, t: float) -> float:
    """Leading large-t form (1/2 pi^2)(log(4 g t) + gamma + 1)."""
    if t <= 0.0 or g <= 0.0:
        raise ValueError("g and t must be > 0")
    return (math.log(4.0 * g * t) + EULER_GAMMA + 1.0) / (2.0 * math.pi**2)


def sine_kernel_number_variance(x: float) -> float:
    """Number variance of the sine-kernel (beta = 2) point process in a
    window of length x: (1/pi^2)(log(2 pi x) + gamma + 1)."""
    if x <= 0.0:
        raise ValueError("x must be > 0")
    return (math.log(2.0 * math.pi * x) + EULER_GAMMA + 1.0) / math.pi**2


def localization_length(energy: float, disorder: float, g: float) -> float:
    """Weak-disorder localization length xi(E) = (96 g^2 - 24 E^2) / W^2
    inside the band |E| <= 2g."""
    if disorder <= 0.0:
        raise ValueError("disorder W must be > 0")
    if abs(energy) > 2.0 * g:
        raise ValueError("energy outside the band |E| <= 2g")
    return (96.0 * g * g - 24.0 * energy * energy) / (disorder * disorder)


def crossover_time(current: float, diffusion: float) -> float:
    """Time where the log law (1/2 pi) log(J t) meets the diffusive line
    D t; the large-t root, via the lower Lambert-W branch."""
    if current <= 0.0:
        raise ValueError("current must be > 0")
    if diffusion < 0.0:
        raise ValueError("diffusion must be >= 0")
    if diffusion == 0.0:
        return math.inf
    a = 2.0 * math.pi * diffusion / current
    branch = 1.0 / math.e
    if a > branch * (1.0 + 1e-15):
        raise NoCrossoverError(f"no log-linear crossing: 2 pi D / J = {a:.6g} > 1/e")
    x = -lambert_w_m1(-min(a, branch)) / a
    return x / current


def crossover_time_leading(current: float, diffusion: float) -> float:
    """Leading-order form log(J/D) / D of the crossover time."""
    if current <= 0.0 or diffusion <= 0.0:
        raise ValueError("current and diffusion must be > 0")
    return math.log(current / diffusion) / diffusion


def thermal_crossover(current: float, sigma: float) -> float:
    """Thermal-noise crossover scale Sigma e^Sigma / J (valid Sigma > 1)."""
    if sigma <= 1.0:
        raise ValueError("thermal crossover form needs Sigma > 1")
    if current <= 0.0:
        raise ValueError("current must be > 0")
    return sigma * math.exp(sigma) / current


def disorder_crossover(current: float, eps: float, eps0: float, diffusion: float | None = None) -> float:
    """Disorder-dominated crossover scale (eps0/eps)^2 / J.

    Valid in the window D/J << (eps/eps0)^2 << 1; when `diffusion` is
    supplied the window is checked and a DisorderRegimeWarning issued if
    violated (the value is still returned).
    """
    if current <= 0.0 or eps <= 0.0 or eps0 <= 0.0:
        raise ValueError("current, eps, eps0 must be > 0")
    ratio2 = (eps / eps0) ** 2
    if diffusion is not None:
        if not (diffusion / current < 0.1 * ratio2 and ratio2 < 1.0):
            warnings.warn(
                f"disorder crossover outside validity window: D/J={diffusion / current:.3g}, (eps/eps0)^2={ratio2:.3g}",
                DisorderRegimeWarning,
                stacklevel=2,
            )
    return 1.0 / (ratio2 * current)
