import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from tickchain.specials import (
    EULER_GAMMA,
    bessel_j0,
    bessel_j1,
    cosine_integral,
    lambert_w_m1,
    sine_integral,
)

GRID = np.logspace(-3, 3, 120)


def quad_j0(x: float) -> float:
    return quad(lambda th: math.cos(x * math.sin(th)), 0.0, math.pi, limit=3000, epsabs=1e-13, epsrel=1e-13)[0] / math.pi


def quad_j1(x: float) -> float:
    return quad(lambda th: math.cos(th - x * math.sin(th)), 0.0, math.pi, limit=3000, epsabs=1e-13, epsrel=1e-13)[0] / math.pi


def quad_si(x: float) -> float:
    return quad(lambda t: math.sin(t) / t if t else 1.0, 0.0, x, limit=3000, epsabs=1e-13, epsrel=1e-13)[0]


def quad_ci(x: float) -> float:
    tail = quad(lambda t: (math.cos(t) - 1.0) / t, 0.0, x, limit=3000, epsabs=1e-13, epsrel=1e-13)[0]
    return EULER_GAMMA + math.log(x) + tail


def _scaled_err(mine, oracle, envelope):
    return abs(mine - oracle) / max(abs(oracle), envelope)


@pytest.mark.parametrize("fn,oracle,envelope", [
    (bessel_j0, quad_j0, lambda x: math.sqrt(2.0 / (math.pi * max(x, 1.0)))),
    (bessel_j1, quad_j1, lambda x: math.sqrt(2.0 / (math.pi * max(x, 1.0)))),
    (sine_integral, quad_si, lambda x: 1.0),
    (cosine_integral, quad_ci, lambda x: 1.0),
])
def test_kernel_vs_quadrature_oracle(fn, oracle, envelope):
    worst = 0.0
    for x in GRID:
        worst = max(worst, _scaled_err(fn(x), oracle(x), envelope(x)))
    assert worst < 1e-10


def test_lambert_lower_branch_vs_rootfind_oracle():
    for z in -np.exp(-np.linspace(1.0, 200.0, 60)):
        w = lambert_w_m1(z)
        w_ref = brentq(lambda t: t * math.exp(t) - z, -800.0, -1.0, xtol=1e-15, rtol=8.9e-16)
        assert abs(w - w_ref) <= 1e-10 * abs(w_ref)
        assert w * math.exp(w) == pytest.approx(z, rel=1e-12)


def test_lambert_branch_point():
    assert lambert_w_m1(-1.0 / math.e) == -1.0
    assert lambert_w_m1(-1.0 / math.e + 1e-14) == pytest.approx(-1.0, abs=2e-6)
    with pytest.raises(ValueError):
        lambert_w_m1(0.1)
    with pytest.raises(ValueError):
        lambert_w_m1(-0.5)


def test_ci_small_x_cancellation():
    x = 1e-4
    assert abs(cosine_integral(x) - math.log(x) - EULER_GAMMA) < 1e-8


def test_euler_gamma_digits():
    assert EULER_GAMMA == pytest.approx(0.57721566490153286, abs=1e-16)


def test_array_evaluation():
    xs = np.array([0.5, 5.0, 50.0])
    assert bessel_j0(xs).shape == (3,)
    assert np.allclose(bessel_j0(xs), [bessel_j0(x) for x in xs])


@settings(max_examples=120, deadline=None)
@given(st.floats(min_value=-500.0, max_value=500.0, allow_nan=False))
def test_bessel_envelope_property(x):
    v = bessel_j0(x) ** 2 + bessel_j1(x) ** 2
    assert 0.0 < v <= 1.0 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e3))
def test_si_odd_and_bounded(x):
    assert sine_integral(-x) == -sine_integral(x)
    assert abs(sine_integral(x)) < 1.8519370520  # global max of Si
