"""Exact moment machinery for the unconditional dynamics: Lyapunov steady
state, current, dynamical activity, diffusion constant, finite-time number
variance at the boundary and at bulk bonds, and the Gaussian-state
determinant generating function."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .chain import ChainSpec, build_effective_hamiltonian
from .errors import InvalidSpecError, NotHurwitzError, TickchainError
from .state import CovarianceState

__all__ = [
    "DriftMatrix",
    "VarianceCurve",
    "ExactMoments",
    "lyapunov_solve",
    "build_drift",
    "steady_state_covariance",
    "me_current",
    "dynamical_activity",
    "jump_dressed_covariance",
    "diffusion_constant",
    "number_variance_exact",
    "bulk_number_variance",
    "bond_current_matrix",
    "levitov_lesovik_log_mgf",
    "sine_kernel_counting_problem",
]

_EXPM_COND_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class DriftMatrix:
    """Drift K = i h - (Gamma/2)(Pi_1 + Pi_N) and pump P = Gamma (f_L Pi_1
    + f_R Pi_N) of the Lyapunov equation dC/dt = KC + CK^dag + P."""

    K: np.ndarray
    P: np.ndarray

    def validate(self) -> None:
        ev = np.linalg.eigvals(self.K)
        if ev.real.max() >= 0.0:
            raise NotHurwitzError(f"drift spectrum reaches Re = {ev.real.max():.3e} >= 0")
        if np.abs(self.P - self.P.conj().T).max() > 1e-12:
            raise InvalidSpecError("pump matrix must be Hermitian")
        evp = np.linalg.eigvalsh(self.P)
        if evp.min() < -1e-12:
            raise InvalidSpecError("pump matrix must be positive semidefinite")
        if np.linalg.matrix_rank(self.P, tol=1e-12) > 2:
            raise InvalidSpecError("pump matrix rank must be <= 2")


@dataclass(eq=False)
class VarianceCurve:
    """Number variance over a time grid with its long-time slope D and
    short-time slope A."""

    times: np.ndarray
    variance: np.ndarray
    diffusion: float
    activity: float

    def validate(self, mono_tol: float = 1e-9) -> None:
        if self.times[0] == 0.0 and abs(self.variance[0]) > 1e-12:
            raise InvalidSpecError("variance must vanish at t = 0")
        dv = np.diff(self.variance)
        if dv.size and dv.min() < -mono_tol * max(1.0, np.abs(self.variance).max()):
            raise InvalidSpecError("variance must be nondecreasing")


def lyapunov_solve(k: np.ndarray, y: np.ndarray, resid_tol: float = 1e-10) -> np.ndarray:
    """Solve K X + X K^dag = Y for Hurwitz K (Bartels-Stewart via complex
    Schur reduction)."""
    k = np.asarray(k, dtype=complex)
    y = np.asarray(y, dtype=complex)
    ev = np.linalg.eigvals(k)
    if ev.real.max() >= 0.0:
        raise NotHurwitzError(f"K is not Hurwitz (max Re eig = {ev.real.max():.3e})")
    x = scipy.linalg.solve_continuous_lyapunov(k, y)
    resid = np.abs(k @ x + x @ k.conj().T - y).max()
    scale = max(np.abs(y).max(), 1e-300)
    if resid > resid_tol * scale:
        raise TickchainError(f"Lyapunov residual {resid:.3e} above {resid_tol:.0e} * ||Y||")
    return x


def build_drift(spec: ChainSpec, shifts=None) -> DriftMatrix:
    h_eff = build_effective_hamiltonian(spec, shifts)
    k = 1j * h_eff.matrix.conj().T
    gam = spec.boundary_rate
    p = np.zeros((spec.n_sites, spec.n_sites), dtype=complex)
    p[0, 0] += gam * spec.occ_left
    p[-1, -1] += gam * spec.occ_right
    return DriftMatrix(k, p)


def _re_traced(value: complex, what: str, tol: float = 1e-8) -> float:
    if abs(value.imag) > tol * max(abs(value.real), 1.0):
        raise TickchainError(f"{what}: imaginary part {value.imag:.3e} too large for 2*Re reduction")
    return float(value.real)


class ExactMoments:
    """Lazy bundle of the exact steady-state quantities of one spec.

    All heavy pieces (steady state, eigendecomposition of the drift) are
    computed once and reused by the derived observables.
    """

    def __init__(self, spec: ChainSpec, shifts=None):
        self.spec = spec
        self.shifts = None if shifts is None else np.asarray(shifts, dtype=float)
        self.drift = build_drift(spec, shifts)
        self.drift.validate()

    @cached_property
    def steady_state(self) -> CovarianceState:
        c = lyapunov_solve(self.drift.K, -self.drift.P)
        c = 0.5 * (c + c.conj().T)
        state = CovarianceState(c, None)
        state.validate(eig_tol=1e-8)
        return state

    @property
    def c_ss(self) -> np.ndarray:
        return self.steady_state.matrix

    @cached_property
    def current(self) -> float:
        gam = self.spec.boundary_rate
        return float(gam * (self.c_ss[-1, -1].real - self.spec.occ_right))

    @cached_property
    def activity(self) -> float:
        gam = self.spec.boundary_rate
        f_r = self.spec.occ_right
        return float(gam * ((1.0 - 2.0 * f_r) * self.c_ss[-1, -1].real + f_r))

    @cached_property
    def jump_dressed(self) -> np.ndarray:
        """Covariance of the net-current-dressed state (J+ - J-) rho / J.

        The forward part is (1-f_R)(C C_NN - C Pi_N C); the backward part
        enters with a minus sign and the whole bracket is conjugated by
        the Jordan-Wigner sign matrix Omega = diag(1,..,1,-1) (which acts
        trivially at full bias, where the bracket's last row and column
        vanish).  Verified entrywise against the dense many-body oracle."""
        j = self.current
        if abs(j) < 1e-12 * self.spec.boundary_rate:
            raise TickchainError("jump-dressed covariance undefined at zero current")
        c = self.c_ss
        n = c.shape[0]
        gam = self.spec.boundary_rate
        f_r = self.spec.occ_right
        pi_n = np.zeros((n, n), dtype=complex)
        pi_n[-1, -1] = 1.0
        cnn = c[-1, -1].real
        out_part = (1.0 - f_r) * (c * cnn - c @ pi_n @ c)
        eye = np.eye(n, dtype=complex)
        in_part = f_r * (c * (1.0 - cnn) + (eye - c) @ pi_n @ (eye - c))
        bracket = (gam / j) * (out_part - in_part)
        bracket[-1, :-1] *= -1.0
        bracket[:-1, -1] *= -1.0
        return bracket

    @cached_property
    def _delta(self) -> np.ndarray:
        return self.jump_dressed - self.c_ss

    @cached_property
    def _x1(self) -> np.ndarray:
        return lyapunov_solve(self.drift.K, self._delta)

    @cached_property
    def _x2(self) -> np.ndarray:
        return lyapunov_solve(self.drift.K, self._x1)

    @cached_property
    def diffusion(self) -> float:
        val = self.activity - 2.0 * self.current * self._x1[-1, -1]
        return _re_traced(val, "diffusion constant")

    @cached_property
    def _propagator(self):
        """Either ('eig', lam, q, qinv) or ('expm', K) depending on the
        eigenvector conditioning of the drift."""
        k = self.drift.K
        lam, q = np.linalg.eig(k)
        cond = np.linalg.cond(q)
        if cond < _EXPM_COND_LIMIT:
            return ("eig", lam, q, np.linalg.inv(q))
        return ("expm", k)

    def propagate(self, x: np.ndarray, t: float) -> np.ndarray:
        """e^{Kt} X e^{K^dag t}."""
        if t == 0.0:
            return x.copy()
        kind = self._propagator[0]
        if kind == "eig":
            _, lam, q, qinv = self._propagator
            phase = np.exp(lam * t)
            inner = (qinv @ x @ qinv.conj().T) * np.outer(phase, np.conj(phase))
            return q @ inner @ q.conj().T
        ekt = scipy.linalg.expm(self._propagator[1] * t)
        return ekt @ x @ ekt.conj().T

    def number_variance(self, times) -> VarianceCurve:
        """Boundary tick-number variance

            Var[N_t] = D t + 2 Re J ( [e^{Kt} X2 e^{K^dag t}]_{NN} - [X2]_{NN} ),

        with X2 the twice Lyapunov-inverted jump-dressed excess; the
        bracket vanishes at t = 0 so Var(0) = 0 by construction."""
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or (times.size > 1 and np.any(np.diff(times) <= 0.0)) or times[0] < 0.0:
            raise InvalidSpecError("times must be an increasing array with times[0] >= 0")
        d = self.diffusion
        j = self.current
        x2_nn = self._x2[-1, -1]
        var = np.empty(times.size)
        for i, t in enumerate(times):
            prop_nn = self.propagate(self._x2, t)[-1, -1]
            var[i] = d * t + 2.0 * _re_traced(j * (prop_nn - x2_nn), "number variance boundary term", 1e-6)
        return VarianceCurve(times, var, d, self.activity)

    def bond_variance(self, k: int, times) -> VarianceCurve:
        """Coherent number variance of bond k (counted from the right):
        Var = 2 Re int_0^t (t-tau) <<j_k(tau) j_k(0)>> dtau, integrated in
        closed form per drift eigenpair."""
        n = self.spec.n_sites
        if not (1 <= k <= n - 1):
            raise InvalidSpecError(f"bond index k must be in [1, {n - 1}]")
        times = np.asarray(times, dtype=float)
        jk = bond_current_matrix(self.spec, k)
        c = self.c_ss
        j = self.current
        sigma_k = (c @ jk - c @ jk @ c) / j + c
        delta = sigma_k - c
        kind = self._propagator[0]
        if kind != "eig":
            raise TickchainError("bond variance requires a diagonalizable drift (conditioning too poor)")
        _, lam, q, qinv = self._propagator
        w = q.conj().T @ jk @ q  # tr[J_k e^{Kt} X e^{K't}] = sum_ab W_ab exp((lam_b+lam_a*)t) Y_ba
        y = qinv @ delta @ qinv.conj().T
        g = w * y.T
        s = lam[None, :] + np.conj(lam)[:, None]  # s_ab = lam_b + lam_a*
        var = np.empty(times.size)
        for i, t in enumerate(times):
            st = s * t
            kernel = (np.exp(st) - 1.0 - st) / (s * s)
            val = j * (g * kernel).sum()
            var[i] = 2.0 * _re_traced(val, "bond variance", 1e-6)
        d_bond = 2.0 * _re_traced(j * (g * (-1.0 / s)).sum(), "bond diffusion", 1e-6)
        return VarianceCurve(times, var, d_bond, self.activity)

    def bond_current(self, k: int) -> float:
        jk = bond_current_matrix(self.spec, k)
        return float(np.trace(jk @ self.c_ss).real)

    def correlator(self, tau: float) -> float:
        """Connected boundary current autocorrelation J tr[Pi_N e^{K tau}
        (C^sigma - C_ss) e^{K^dag tau}] for tau > 0."""
        return _re_traced(self.current * self.propagate(self._delta, tau)[-1, -1], "current correlator", 1e-6)


def bond_current_matrix(spec: ChainSpec, k: int) -> np.ndarray:
    """One-body matrix of the bond current j_k = +i g (c^dag_a c_b - c^dag_b c_a)
    across the k-th bond from the right (a = N-k, b = N-k+1, 1-based), in
    the convention j = sum_{mn} (J_k)_{mn} c_n^dag c_m so that
    <j> = tr[J_k C].

    The sign follows from the continuity equation for the +g hopping
    convention of the effective Hamiltonian used here; it makes the
    stationary bond current equal +J everywhere."""
    n = spec.n_sites
    if not (1 <= k <= n - 1):
        raise InvalidSpecError(f"bond index k must be in [1, {n - 1}]")
    a = n - k - 1  # 0-based left site of the bond
    b = a + 1
    g = spec.couplings[a]
    jk = np.zeros((n, n), dtype=complex)
    jk[b, a] = 1j * g
    jk[a, b] = -1j * g
    return jk


# -- module-level convenience wrappers ------------------------------------

def steady_state_covariance(spec: ChainSpec, shifts=None) -> CovarianceState:
    return ExactMoments(spec, shifts).steady_state


def me_current(spec: ChainSpec, shifts=None) -> float:
    return ExactMoments(spec, shifts).current


def dynamical_activity(spec: ChainSpec, shifts=None) -> float:
    return ExactMoments(spec, shifts).activity


def jump_dressed_covariance(spec: ChainSpec, shifts=None) -> np.ndarray:
    return ExactMoments(spec, shifts).jump_dressed


def diffusion_constant(spec: ChainSpec, shifts=None) -> float:
    return ExactMoments(spec, shifts).diffusion


def number_variance_exact(spec: ChainSpec, times, shifts=None) -> VarianceCurve:
    return ExactMoments(spec, shifts).number_variance(times)


def bulk_number_variance(spec: ChainSpec, k: int, times, shifts=None) -> VarianceCurve:
    return ExactMoments(spec, shifts).bond_variance(k, times)


# -- Levitov-Lesovik determinant route ------------------------------------

def levitov_lesovik_log_mgf(c: np.ndarray, a: np.ndarray, lam: float, herm_tol: float = 1e-9) -> float:
    """log <e^{lambda N}> = log det[1 + C (e^{lambda A} - 1)] for a Gaussian
    state with one-body density matrix C (spectrum in [0,1]) and counting
    matrix A, via pivoted LU.  Cumulants: d/dlam at 0 gives tr[CA], the
    second derivative tr[CA^2] - tr[(CA)^2]."""
    c = np.asarray(c, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if np.abs(c - c.conj().T).max() > herm_tol or np.abs(a - a.conj().T).max() > herm_tol:
        raise InvalidSpecError("C and A must be Hermitian")
    evc = np.linalg.eigvalsh(c)
    if evc.min() < -1e-8 or evc.max() > 1.0 + 1e-8:
        raise InvalidSpecError("C spectrum must lie in [0, 1]")
    if lam == 0.0:
        return 0.0
    evs, vecs = np.linalg.eigh(a)
    exp_a = (vecs * np.exp(lam * evs)) @ vecs.conj().T
    m = np.eye(c.shape[0], dtype=complex) + c @ (exp_a - np.eye(c.shape[0]))
    sign, logabs = np.linalg.slogdet(m)
    if not np.isfinite(logabs) or abs(np.angle(sign)) > 1e-6:
        raise TickchainError(f"determinant left the positive domain at lambda = {lam}")
    return float(logabs)


def sine_kernel_counting_problem(x: float, n_modes: int):
    """Discretized sine-kernel window-counting instance at unit density.

    Gauss-Legendre discretization of the window [0, x]: C is the weighted
    kernel matrix sqrt(w_i w_j) sin(pi(x_i-x_j))/(pi(x_i-x_j)) (the
    restriction of the momentum projector to the window) and A = identity,
    so det[1 + C(e^lam - 1)] is the window counting MGF.  Refining n_modes
    converges spectrally; the second cumulant approaches the sine-kernel
    number variance (1/pi^2)(log 2 pi x + gamma + 1) for large x."""
    if x <= 0.0 or n_modes < 2:
        raise InvalidSpecError("need x > 0 and at least two modes")
    nodes, weights = np.polynomial.legendre.leggauss(n_modes)
    pos = 0.5 * x * (nodes + 1.0)
    w = 0.5 * x * weights
    diff = pos[:, None] - pos[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = np.sin(math.pi * diff) / (math.pi * diff)
    np.fill_diagonal(kern, 1.0)
    sq = np.sqrt(w)
    c = (sq[:, None] * kern * sq[None, :]).astype(complex)
    a = np.eye(n_modes, dtype=complex)
    return c, a
