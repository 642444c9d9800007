import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from tickchain.chain import ChainSpec, build_effective_hamiltonian, stream
from tickchain.errors import InvalidSpecError, NotHurwitzError, TickchainError
from tickchain import landauer as lb
from tickchain import moments as mo


def kron_lyapunov_oracle(k, y):
    """Brute-force vectorized solve of K X + X K^dag = Y."""
    n = k.shape[0]
    eye = np.eye(n)
    big = np.kron(k, eye) + np.kron(eye, k.conj())
    return np.linalg.solve(big, y.reshape(-1)).reshape(n, n)


def test_lyapunov_trivial_cases():
    k = -np.eye(3, dtype=complex)
    assert np.allclose(mo.lyapunov_solve(k, -2.0 * np.eye(3)), np.eye(3), atol=1e-13)
    assert np.allclose(mo.lyapunov_solve(k, np.zeros((3, 3))), 0.0)


def test_lyapunov_vs_kronecker_oracle():
    r = stream(5)
    a = r.normal(size=(8, 8)) + 1j * r.normal(size=(8, 8))
    k = a - 9.0 * np.eye(8)  # comfortably Hurwitz
    y = r.normal(size=(8, 8)) + 1j * r.normal(size=(8, 8))
    y = 0.5 * (y + y.conj().T)
    x = mo.lyapunov_solve(k, y)
    assert np.abs(x - kron_lyapunov_oracle(k, y)).max() < 1e-10
    resid = k @ x + x @ k.conj().T - y
    assert np.abs(resid).max() < 1e-10 * np.abs(y).max()


def test_lyapunov_rejects_non_hurwitz():
    with pytest.raises(NotHurwitzError):
        mo.lyapunov_solve(np.eye(2, dtype=complex), -np.eye(2, dtype=complex))


def test_drift_matrix_structure(spec_n20):
    drift = mo.build_drift(spec_n20)
    drift.validate()
    assert np.linalg.matrix_rank(drift.P) == 1  # full bias pumps only on the left
    warm = ChainSpec.from_entropy(4, [0.3, 0.3, 0.3], 2.0)
    drift_warm = mo.build_drift(warm)
    drift_warm.validate()
    assert np.linalg.matrix_rank(drift_warm.P) == 2


def test_steady_state_n1_full_bias():
    state = mo.steady_state_covariance(ChainSpec(1, []))
    assert np.allclose(state.matrix, [[0.5]], atol=1e-13)
    assert mo.me_current(ChainSpec(1, [])) == pytest.approx(0.5, abs=1e-13)


def test_steady_state_equilibrium_is_flat():
    spec = ChainSpec(5, np.full(4, 0.37), occ_left=0.42, occ_right=0.42)
    state = mo.steady_state_covariance(spec)
    assert np.abs(state.matrix - 0.42 * np.eye(5)).max() < 1e-12
    assert mo.me_current(spec) == pytest.approx(0.0, abs=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 5000))
def test_steady_state_spectrum_property(seed):
    r = stream(seed, 31)
    n = int(r.integers(1, 10))
    f_l, f_r = sorted(r.uniform(0.0, 1.0, 2))[::-1]
    spec = ChainSpec(n, r.uniform(0.1, 0.8, n - 1), occ_left=f_l, occ_right=f_r)
    state = mo.steady_state_covariance(spec)
    evals = np.linalg.eigvalsh(state.matrix)
    assert evals.min() > -1e-10 and evals.max() < 1.0 + 1e-10


def test_activity_reductions(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    assert ex.activity == pytest.approx(ex.current, abs=1e-13)  # full bias: A = J
    half = ChainSpec(spec_n20.n_sites, spec_n20.couplings, occ_left=0.5, occ_right=0.5)
    assert mo.dynamical_activity(half) == pytest.approx(0.5, abs=1e-12)
    warm = ChainSpec.from_entropy(spec_n20.n_sites, spec_n20.couplings, 5.5)
    ex_warm = mo.ExactMoments(warm)
    assert ex_warm.activity > ex_warm.current


def test_jump_dressed_full_bias_reduction(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    c = ex.c_ss
    n = c.shape[0]
    pi_n = np.zeros((n, n), dtype=complex)
    pi_n[-1, -1] = 1.0
    expect = c - c @ pi_n @ c / ex.current
    assert np.abs(ex.jump_dressed - expect).max() < 1e-12
    # exact Wick trace identity; (tr C - 1) only in the projector limit
    tr = np.trace(ex.jump_dressed).real
    assert tr == pytest.approx(np.trace(c).real - (c @ c)[-1, -1].real / c[-1, -1].real, abs=1e-10)


def test_zero_current_jump_dressed_raises():
    spec = ChainSpec(3, [0.4, 0.4], occ_left=0.3, occ_right=0.3)
    with pytest.raises(TickchainError):
        mo.jump_dressed_covariance(spec)


def test_diffusion_matches_residue_route(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    dec = lb.spectral_decompose(build_effective_hamiltonian(spec_n20))
    assert abs(ex.current - lb.current_zero_T(dec)) / lb.current_zero_T(dec) < 1e-8
    assert abs(ex.diffusion - lb.noise_zero_T(dec)) / lb.noise_zero_T(dec) < 1e-6


def test_n1_diffusion_quadrature_oracle():
    d_oracle = quad(lambda e: (e * e) / (e * e + 1.0) ** 2, -np.inf, np.inf)[0] / (2 * math.pi)
    assert mo.diffusion_constant(ChainSpec(1, [])) == pytest.approx(d_oracle, abs=1e-10)


def test_wbl_identity_at_finite_bias():
    g = np.full(39, 0.2)
    s0 = lb.fano_factor(ChainSpec(40, g))
    spec = ChainSpec.from_entropy(40, g, 5.5)
    d_me = mo.diffusion_constant(spec)
    d_wbl = lb.wbl_finite_bias(s0.current, s0.diffusion, 5.5).diffusion
    assert abs(d_me - d_wbl) / d_wbl < 1e-6


def test_number_variance_construction(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    times = np.array([0.0, 0.05, 0.5, 5.0, 50.0, 1500.0, 1505.0])
    curve = ex.number_variance(times)
    curve.validate()
    assert curve.variance[0] == 0.0
    # the slow band-edge transient decays at rate 2 min|Im eig| ~ 0.01
    slope_tail = (curve.variance[-1] - curve.variance[-2]) / 5.0
    assert slope_tail == pytest.approx(ex.diffusion, rel=1e-6)
    # shot-noise onset: Var ~ A t below the relaxation time
    t_small = np.array([0.0, 0.02, 0.2])
    v = ex.number_variance(t_small)
    assert v.variance[1] / t_small[1] == pytest.approx(ex.activity, rel=0.05)
    assert v.variance[2] / t_small[2] == pytest.approx(ex.activity, rel=0.05)
    with pytest.raises(InvalidSpecError):
        ex.number_variance(np.array([1.0, 0.5]))


def test_bond_current_conservation(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    currents = [ex.bond_current(k) for k in range(1, spec_n20.n_sites)]
    assert np.allclose(currents, ex.current, atol=1e-12)


def test_bulk_variance_against_boundary(spec_n40):
    ex = mo.ExactMoments(spec_n40)
    times = np.geomspace(15.0, 500.0, 12)
    boundary = ex.number_variance(np.concatenate([[0.0], times])).variance[1:]
    bond1 = ex.bond_variance(1, times)
    bond1.validate()
    # past the shot-noise onset the innermost bond shadows the boundary
    assert np.max(np.abs(bond1.variance - boundary) / boundary) < 0.05
    early = np.geomspace(8.0, 60.0, 8)  # tJ in [0.7, 6]
    bdry_early = ex.number_variance(np.concatenate([[0.0], early])).variance[1:]
    ratio = ex.bond_variance(spec_n40.n_sites // 2, early).variance / bdry_early
    assert 0.4 < ratio.mean() < 0.6  # approximately half at short times
    # the coherent onset starts below the shot-noise boundary curve
    t0 = np.array([1.0, 2.0])
    assert np.all(ex.bond_variance(1, t0).variance < ex.number_variance(np.concatenate([[0.0], t0])).variance[1:])


def test_bond_index_validation(spec_n20):
    ex = mo.ExactMoments(spec_n20)
    with pytest.raises(InvalidSpecError):
        ex.bond_variance(0, np.array([1.0]))
    with pytest.raises(InvalidSpecError):
        mo.bond_current_matrix(spec_n20, spec_n20.n_sites)


# -- Levitov-Lesovik -------------------------------------------------------

def _random_instance(seed, n=6):
    r = stream(seed, 99)
    x = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    a = 0.5 * (x + x.conj().T)
    y = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    h = y @ y.conj().T
    ev, v = np.linalg.eigh(h)
    c = (v * (ev / (1.0 + ev))) @ v.conj().T
    return c, a


def test_levitov_lesovik_zero():
    c, a = _random_instance(1)
    assert mo.levitov_lesovik_log_mgf(c, a, 0.0) == 0.0


@pytest.mark.parametrize("seed", [2, 3, 4])
def test_levitov_lesovik_cumulants_vs_trace(seed):
    c, a = _random_instance(seed)
    h = 1e-3
    vals = {x: mo.levitov_lesovik_log_mgf(c, a, x * h) for x in (-2, -1, 1, 2)}
    mean_fd = (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h)
    var_fd = (-vals[-2] + 16 * vals[-1] + 16 * vals[1] - vals[2]) / (12 * h * h)
    mean_tr = np.trace(c @ a).real
    var_tr = (np.trace(c @ a @ a) - np.trace(c @ a @ c @ a)).real
    assert abs(mean_fd - mean_tr) < 1e-8 * max(1.0, abs(mean_tr))
    assert abs(var_fd - var_tr) < 1e-8 * max(1.0, abs(var_tr))


def test_levitov_lesovik_variance_vs_wick_quadratic_form():
    # Wick algebra on a product state: Var[sum A_ij c_i^dag c_j] for a
    # diagonal occupation matrix reduces to sum_ij n_i (1 - n_j) |A_ij|^2
    r = stream(11, 99)
    n = 5
    occ = r.uniform(0.0, 1.0, n)
    c = np.diag(occ).astype(complex)
    x = r.normal(size=(n, n)) + 1j * r.normal(size=(n, n))
    a = 0.5 * (x + x.conj().T)
    var_tr = (np.trace(c @ a @ a) - np.trace(c @ a @ c @ a)).real
    wick = sum(occ[i] * (1.0 - occ[j]) * abs(a[i, j]) ** 2 for i in range(n) for j in range(n))
    assert var_tr == pytest.approx(wick, rel=1e-12)


def test_levitov_lesovik_domain_and_validation():
    c, a = _random_instance(7)
    with pytest.raises(InvalidSpecError):
        mo.levitov_lesovik_log_mgf(c + 0.5j * np.eye(6), a, 0.1)
    with pytest.raises(InvalidSpecError):
        mo.levitov_lesovik_log_mgf(2.0 * np.eye(3), np.eye(3), 0.1)


def test_sine_kernel_window_variance_refines():
    from tickchain.asymptotics import sine_kernel_number_variance

    target = sine_kernel_number_variance(10.0)
    errs = []
    for n_modes in (40, 80, 160):
        c, a = mo.sine_kernel_counting_problem(10.0, n_modes)
        h = 1e-3
        lp, lm = mo.levitov_lesovik_log_mgf(c, a, h), mo.levitov_lesovik_log_mgf(c, a, -h)
        var = (lp + lm) / (h * h)
        errs.append(abs(var - target) / target)
        assert np.trace(c @ a).real == pytest.approx(10.0, rel=1e-8)
    assert errs[-1] < 0.02
