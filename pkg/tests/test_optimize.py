import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from tickchain.chain import ChainSpec
from tickchain.errors import InvalidSpecError
from tickchain.landauer import fano_factor
from tickchain import optimize as op


def test_n2_matches_golden_section_oracle():
    prof = op.optimize_couplings(2, budget=3000, seed=1)
    res = minimize_scalar(
        lambda g: fano_factor(ChainSpec(2, [g])).fano,
        bracket=(0.1, 0.5, 1.5),
        method="golden",
        options={"xtol": 1e-12},
    )
    assert abs(prof.values[0] - res.x) < 1e-6
    assert prof.objective <= res.fun + 1e-12


def test_boundary_exceeds_bulk():
    prof = op.optimize_couplings(12, seed=2)
    bulk, window, ratio = op.apodization_report(prof)
    assert prof.values[0] > bulk
    assert ratio > 1.0
    assert window >= 1


def test_profile_symmetry_and_positivity():
    prof = op.optimize_couplings(9, seed=3, budget=2500)
    g = prof.values
    assert np.abs(g - g[::-1]).max() < 1e-12
    assert np.all(g > 0.0)
    prof.validate()


def test_beats_flat_profile_with_same_bulk():
    prof = op.optimize_couplings(10, seed=4)
    bulk, _, _ = op.apodization_report(prof)
    flat = fano_factor(ChainSpec(10, np.full(9, bulk)))
    assert prof.objective <= flat.fano + 1e-12


def test_determinism():
    a = op.optimize_couplings(7, seed=11, budget=1500)
    b = op.optimize_couplings(7, seed=11, budget=1500)
    assert np.array_equal(a.values, b.values)
    assert a.objective == b.objective and a.iterations == b.iterations


def test_budget_exhaustion_flags_unconverged():
    prof = op.optimize_couplings(10, seed=5, budget=80)
    assert not prof.converged
    assert prof.objective < 1.0  # still returns the best point found


def test_explicit_window_and_bounds():
    prof = op.optimize_couplings(10, window_m=2, seed=6, budget=2000)
    g = prof.values
    assert np.allclose(g[2:-2], g[4], atol=1e-12)  # bulk beyond the window
    with pytest.raises(InvalidSpecError):
        op.optimize_couplings(1)


def test_window_sensitivity_reported():
    # the achievable objective saturates as the window widens
    vals = [op.optimize_couplings(14, window_m=m, seed=7, budget=3000).objective for m in (1, 3, 6)]
    assert vals[0] >= vals[1] >= vals[2] - 1e-12


def test_fit_power_law_exact():
    xs = np.array([1.0, 2.0, 4.0, 8.0])
    fit = op.fit_power_law(xs, 3.0 * xs**2)
    assert fit.exponent == pytest.approx(2.0, abs=1e-12)
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)
    assert 0.0 < fit.exponent_err < 1e-8


def test_fit_power_law_errors():
    with pytest.raises(InvalidSpecError):
        op.fit_power_law([1.0], [2.0])
    with pytest.raises(InvalidSpecError):
        op.fit_power_law([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])


def test_fit_power_law_noisy_error_estimate():
    from tickchain.chain import stream

    r = stream(8)
    xs = np.geomspace(1.0, 100.0, 30)
    ys = 2.0 * xs**-1.5 * np.exp(r.normal(0.0, 0.05, xs.size))
    fit = op.fit_power_law(xs, ys)
    assert fit.exponent == pytest.approx(-1.5, abs=4.0 * fit.exponent_err)


def test_apodization_report_flat():
    prof = op.CouplingProfile(np.full(9, 0.4), 0.1, 10, True)
    bulk, window, ratio = op.apodization_report(prof)
    assert bulk == pytest.approx(0.4)
    assert window == 0
    assert ratio == pytest.approx(1.0)


def test_expand_profile_shapes():
    g = op.expand_profile(8, 0.2, np.array([0.4, 0.3]))
    assert np.allclose(g, [0.4, 0.3, 0.2, 0.2, 0.2, 0.3, 0.4])
    with pytest.raises(InvalidSpecError):
        op.expand_profile(4, 0.2, np.array([0.4, 0.3]))
