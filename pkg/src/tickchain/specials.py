"""Special-function kernel: Bessel J0/J1, sine/cosine integrals, and the
lower real branch of the Lambert W function.

Each function combines a power series with a large-argument method
(Hankel asymptotic series for the Bessel functions, a Lentz continued
fraction for Si/Ci via E1(ix), Halley iteration for W_{-1}) and is tested
against adaptive-quadrature / root-finding oracles.  The series/asymptotic
switch for J0/J1 sits at |x| = 14, balancing power-series cancellation
against Hankel-series truncation (both below 1e-11 scaled); Si/Ci switch
at x = 4.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "EULER_GAMMA",
    "bessel_j0",
    "bessel_j1",
    "sine_integral",
    "cosine_integral",
    "lambert_w_m1",
    "SpecialFunctionKernel",
    "kernel",
]

EULER_GAMMA = 0.5772156649015329

_BESSEL_SWITCH = 14.0
_SICI_SWITCH = 4.0


def _j0_series(x: float) -> float:
    q = 0.25 * x * x
    term = 1.0
    acc = 1.0
    for k in range(1, 200):
        term *= -q / (k * k)
        acc += term
        if abs(term) < 1e-18 * abs(acc) + 1e-300:
            break
    return acc


def _j1_series(x: float) -> float:
    q = 0.25 * x * x
    term = 1.0
    acc = 1.0
    for k in range(1, 200):
        term *= -q / (k * (k + 1))
        acc += term
        if abs(term) < 1e-18 * abs(acc) + 1e-300:
            break
    return 0.5 * x * acc


def _hankel_pq(nu: int, x: float) -> tuple[float, float]:
    """P and Q sums of the Hankel large-x expansion, truncated at the
    smallest term."""
    mu = 4.0 * nu * nu
    p = 1.0
    q = 0.0
    term = 1.0
    prev = math.inf
    for k in range(1, 80):
        term *= (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = abs(term)
        if mag >= prev:
            break
        prev = mag
        # expansion applies (-1)^floor(k/2) to a_k / x^k
        s = 1.0 if (k // 2) % 2 == 0 else -1.0
        if k % 2 == 1:
            q += s * term
        else:
            p += s * term
        if mag < 1e-18:
            break
    return p, q


def _j_asymptotic(nu: int, x: float) -> float:
    p, q = _hankel_pq(nu, x)
    chi = x - (0.5 * nu + 0.25) * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _j0_scalar(x: float) -> float:
    x = abs(float(x))
    if x <= _BESSEL_SWITCH:
        return _j0_series(x)
    return _j_asymptotic(0, x)


def _j1_scalar(x: float) -> float:
    x = float(x)
    s = -1.0 if x < 0.0 else 1.0
    x = abs(x)
    if x <= _BESSEL_SWITCH:
        return s * _j1_series(x)
    return s * _j_asymptotic(1, x)


def _sici_series(x: float) -> tuple[float, float]:
    # Si(x) = sum_k (-1)^k x^(2k+1) / ((2k+1)(2k+1)!)
    # Ci(x) = gamma + log x + sum_{k>=1} (-1)^k x^(2k) / ((2k)(2k)!)
    x2 = x * x
    si = x
    term = x
    for k in range(1, 120):
        term *= -x2 / ((2 * k) * (2 * k + 1))
        si += term / (2 * k + 1)
        if abs(term) < 1e-18 * abs(si) + 1e-300:
            break
    cin = 0.0
    term = 1.0
    for k in range(1, 120):
        term *= -x2 / ((2 * k - 1) * (2 * k))
        cin += term / (2 * k)
        if abs(term) < 1e-18 + 1e-18 * abs(cin):
            break
    return si, EULER_GAMMA + math.log(x) + cin


def _e1_imag_cf(x: float) -> complex:
    """E1(i*x) for x > 0 by the modified Lentz continued fraction."""
    z = 1j * x
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 100000):
        a = -float(i * i)
        b += 2.0
        d = a * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + a / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * np.exp(-z)


def _si_scalar(x: float) -> float:
    x = float(x)
    if x <= 0.0:
        if x == 0.0:
            return 0.0
        return -_si_scalar(-x)
    if x <= _SICI_SWITCH:
        return _sici_series(x)[0]
    return 0.5 * math.pi + _e1_imag_cf(x).imag


def _ci_scalar(x: float) -> float:
    x = float(x)
    if x <= 0.0:
        raise ValueError("Ci(x) requires x > 0")
    if x <= _SICI_SWITCH:
        return _sici_series(x)[1]
    return -_e1_imag_cf(x).real


def _lambert_w_m1_scalar(z: float) -> float:
    """Lower real branch W_{-1}(z) on [-1/e, 0)."""
    z = float(z)
    if not (-1.0 / math.e <= z < 0.0):
        raise ValueError(f"W_-1 requires -1/e <= z < 0, got {z}")
    p2 = 2.0 * (math.e * z + 1.0)
    if p2 <= 0.0:
        return -1.0
    if p2 < 1e-4:
        p = -math.sqrt(p2)
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
    else:
        l1 = math.log(-z)
        w = l1 - math.log(-l1)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        dw = f / denom
        w -= dw
        if abs(dw) < 1e-16 * (1.0 + abs(w)):
            break
    return w


def _vectorize(scalar, doc: str):
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            return scalar(float(arr))
        out = np.empty(arr.shape)
        flat = arr.ravel()
        o = out.ravel()
        for i in range(flat.size):
            o[i] = scalar(flat[i])
        return out

    wrapped.__doc__ = doc
    return wrapped


bessel_j0 = _vectorize(_j0_scalar, "Bessel function of the first kind, order zero.")
bessel_j1 = _vectorize(_j1_scalar, "Bessel function of the first kind, order one.")
sine_integral = _vectorize(_si_scalar, "Si(x) = int_0^x sin(t)/t dt.")
cosine_integral = _vectorize(_ci_scalar, "Ci(x) for x > 0.")
lambert_w_m1 = _vectorize(_lambert_w_m1_scalar, "Lambert W, lower real branch, on [-1/e, 0).")


class SpecialFunctionKernel:
    """Bundle of the special functions the closed-form results require."""

    j0 = staticmethod(bessel_j0)
    j1 = staticmethod(bessel_j1)
    si = staticmethod(sine_integral)
    ci = staticmethod(cosine_integral)
    w_m1 = staticmethod(lambert_w_m1)
    euler_gamma = EULER_GAMMA


kernel = SpecialFunctionKernel()
