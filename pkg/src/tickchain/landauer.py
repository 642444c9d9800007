"""Exact transport observables of the open chain: transmission, current,
zero-frequency noise and Fano factor, by residue calculus over the
spectrum of the effective Hamiltonian and by adaptive quadrature of the
scattering integrals (the two routes serve as mutual oracles)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded

from .chain import ChainSpec, EffectiveHamiltonian, build_effective_hamiltonian
from .errors import DegenerateSpectrumError, QuadratureError, TransmissionBoundError

__all__ = [
    "SpectralDecomposition",
    "TransportSummary",
    "ForwardSplit",
    "transmission",
    "spectral_decompose",
    "current_zero_T",
    "noise_zero_T",
    "transport_summary",
    "lb_numeric",
    "wbl_finite_bias",
    "thermal_boxcar_diffusion",
    "me_lb_gap_bound",
    "forward_only_noise",
    "fano_factor",
]

_CLAMP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransportSummary:
    """Current J, diffusion constant D, and Fano factor D/J."""

    current: float
    diffusion: float
    fano: float

    def validate(self, atol: float = 1e-10) -> None:
        if self.current < 0.0 or self.diffusion < 0.0:
            raise ValueError("current and diffusion must be nonnegative")
        if math.isfinite(self.fano):
            if abs(self.fano * self.current - self.diffusion) > atol * max(1.0, self.diffusion):
                raise ValueError("fano * current != diffusion")


def _summary(current: float, diffusion: float) -> TransportSummary:
    fano = diffusion / current if current > 0.0 else math.inf
    return TransportSummary(current, diffusion, fano)


class ForwardSplit(NamedTuple):
    """Directional decomposition of the boundary counting statistics."""

    j_plus: float
    d_plus: float
    j_minus: float
    cross_term: float


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigendecomposition of h_eff plus the transmission pole tensor.

    `coeffs` is C_{lm} = Gamma_L Gamma_R * Q_{1l} (Q^-1)_{lN} Q*_{1m} (Q^-1)*_{mN}
    (the Gamma product is 1 in the paper's units), so that
    T(z) = sum_{lm} C_{lm} / ((lambda_l - z)(lambda_m* - z)).
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    inverse_vectors: np.ndarray
    coeffs: np.ndarray
    amplitudes: np.ndarray  # w_l with coeffs = outer(w, conj(w))

    def validate(self, h: EffectiveHamiltonian, tol: float = 1e-10) -> None:
        recon = self.right_vectors @ np.diag(self.eigenvalues) @ self.inverse_vectors
        scale = np.abs(h.matrix).max()
        if np.abs(recon - h.matrix).max() > tol * max(scale, 1.0):
            raise ValueError("eigendecomposition does not reconstruct h_eff")


def _banded(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = np.diag(h, 1)
    ab[1, :] = np.diag(h)
    ab[2, :-1] = np.diag(h, -1)
    return ab


def transmission(h: EffectiveHamiltonian, energy, gamma_left: float | None = None, gamma_right: float | None = None):
    """T(E) = Gamma_L Gamma_R |[(h_eff - E)^-1]_{1N}|^2, by a banded linear
    solve, clamped to [0, 1].  A raw value above 1 + 1e-9 signals a broken
    solve and raises."""
    gl = h.gamma_left if gamma_left is None else gamma_left
    gr = h.gamma_right if gamma_right is None else gamma_right
    n = h.matrix.shape[0]
    energies = np.atleast_1d(np.asarray(energy, dtype=float))
    out = np.empty(energies.shape)
    rhs = np.zeros(n, dtype=complex)
    rhs[-1] = 1.0
    base = _banded(h.matrix)
    for i, e in enumerate(energies):
        ab = base.copy()
        ab[1, :] -= e
        x = solve_banded((1, 1), ab, rhs)
        raw = gl * gr * abs(x[0]) ** 2
        if raw > 1.0 + _CLAMP_TOL:
            raise TransmissionBoundError(f"T({e}) = {raw} exceeds 1 beyond the clamp tolerance")
        out[i] = min(raw, 1.0)
    return out[0] if np.isscalar(energy) or np.asarray(energy).ndim == 0 else out


def spectral_decompose(h: EffectiveHamiltonian, gap_tol: float = 1e-9) -> SpectralDecomposition:
    """Eigendecomposition with the precomputed pole-coefficient tensor.

    Raises DegenerateSpectrumError when the decomposition is numerically
    defective (ill-conditioned eigenvectors or bad reconstruction) or the
    spectrum is not strictly dissipative; callers should fall back to
    quadrature.  Non-defective (near-)degenerate clusters -- e.g. the
    exponentially split parity pairs of long symmetric chains -- are
    harmless here and are merged inside the residue sums, where gap_tol
    sets the clustering scale.
    """
    m = h.matrix
    lam, q = np.linalg.eig(m)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    q = q[:, order]
    scale = max(np.abs(m).max(), 1e-300)
    if np.linalg.cond(q) > 1e8:
        raise DegenerateSpectrumError("defective eigenbasis (condition > 1e8); use the quadrature fallback")
    qinv = np.linalg.inv(q)
    if lam.imag.max() >= 0.0:
        raise DegenerateSpectrumError("spectrum not strictly dissipative; use the quadrature fallback")
    w = q[0, :] * qinv[:, -1] * math.sqrt(h.gamma_left * h.gamma_right)
    coeffs = np.outer(w, np.conj(w))
    dec = SpectralDecomposition(lam, q, qinv, coeffs, w)
    try:
        dec.validate(h)
    except ValueError as exc:
        raise DegenerateSpectrumError(str(exc)) from exc
    return dec


def _merge_clusters(lam: np.ndarray, w: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge eigenvalue clusters closer than tol into single poles with
    summed weights (exact for non-defective degeneracies)."""
    n = lam.size
    labels = -np.ones(n, dtype=int)
    cur = 0
    for i in range(n):
        if labels[i] >= 0:
            continue
        stack = [i]
        labels[i] = cur
        while stack:
            a = stack.pop()
            close = np.abs(lam - lam[a]) < tol
            for b in np.nonzero(close)[0]:
                if labels[b] < 0:
                    labels[b] = cur
                    stack.append(b)
        cur += 1
    lam_m = np.empty(cur, dtype=complex)
    w_m = np.empty(cur, dtype=complex)
    for k in range(cur):
        members = labels == k
        lam_m[k] = lam[members].mean()
        w_m[k] = w[members].sum()
    return lam_m, w_m


def _residues(dec: SpectralDecomposition, gap_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Residue r(mu) and regular part s(mu) of T(z) at its upper-half-plane
    poles z = mu*.

    T(z) = sum_{lm} C_{lm}/((lam_l - z)(lam_m* - z)) with C = outer(w, w*);
    near z = mu*, T = g(z)/(z - mu*) + regular with
    g(z) = -sum_l C_{lm}/(lam_l - z):
        r(mu) = g(mu*),
        s(mu) = g'(mu*) + sum_{n != mu} sum_l C_{ln}/((lam_l - mu*)(lam_n* - mu*)).
    Near-degenerate pole clusters are merged first so no denominator falls
    below the clustering scale.
    """
    scale = float(np.abs(dec.eigenvalues).max())
    lam, w = _merge_clusters(dec.eigenvalues, dec.amplitudes, gap_tol * max(scale, 1e-300) * 10.0)
    if w.size and np.abs(w).max() > 1e6 * (np.median(np.abs(w)) + 1e-300):
        raise DegenerateSpectrumError("pole weights ill-conditioned; use the quadrature fallback")
    c = np.outer(w, np.conj(w))
    d1 = lam[:, None] - np.conj(lam)[None, :]  # d1[l, m] = lam_l - mu_m*
    r = -(c / d1).sum(axis=0)
    g_prime = -(c / (d1 * d1)).sum(axis=0)
    b = c.T @ (1.0 / d1)  # b[n, m] = sum_l C_{ln} / (lam_l - mu_m*)
    e = np.conj(lam[:, None] - lam[None, :])  # e[n, m] = lam_n* - mu_m*
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = b / e
    np.fill_diagonal(frac, 0.0)
    s = g_prime + frac.sum(axis=0)
    return r, s


def current_zero_T(dec: SpectralDecomposition, imag_tol: float = 1e-10) -> float:
    """Full-bias zero-temperature current J = (1/2pi) int T(E) dE by
    residues."""
    r, _ = _residues(dec)
    j = 1j * r.sum()
    if abs(j.imag) > imag_tol * max(1.0, abs(j.real)):
        raise DegenerateSpectrumError(f"residue current has imaginary part {j.imag:.3e}")
    return float(j.real)


def noise_zero_T(dec: SpectralDecomposition, imag_tol: float = 1e-10) -> float:
    """Full-bias zero-temperature noise D = (1/2pi) int T(1-T) dE by
    residues."""
    r, s = _residues(dec)
    val = 1j * r.sum() - 2j * (r * s).sum()
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise DegenerateSpectrumError(f"residue noise has imaginary part {val.imag:.3e}")
    return float(val.real)


def transport_summary(dec: SpectralDecomposition) -> TransportSummary:
    return _summary(current_zero_T(dec), noise_zero_T(dec))


def fano_factor(spec: ChainSpec, shifts=None) -> TransportSummary:
    """Full-bias zero-T transport summary for a spec: residue route with
    quadrature fallback on (near-)degenerate spectra."""
    h = build_effective_hamiltonian(spec, shifts)
    try:
        return transport_summary(spectral_decompose(h))
    except DegenerateSpectrumError:
        return lb_numeric(h, math.inf, -math.inf, math.inf)


def _band_points(h: EffectiveHamiltonian) -> tuple[float, list[float]]:
    """Integration cutoff and interior breakpoints: the band edges plus
    the resonance positions Re(eig h_eff), where disordered chains put
    needle-sharp transmission peaks that blind adaptive quadrature."""
    g = h.couplings
    gmax = float(g.max()) if g.size else 0.0
    shift = float(np.abs(h.onsite_shifts).max()) if h.onsite_shifts.size else 0.0
    gamma = max(h.gamma_left, h.gamma_right)
    e_max = 2.0 * gmax + shift + 10.0 * gamma
    pts = [-2.0 * gmax - shift, 0.0, 2.0 * gmax + shift]
    pts.extend(np.linalg.eigvals(h.matrix).real.tolist())
    return e_max, pts


def _quad_real_line(f, e_max: float, inner_points: list[float], abs_tol: float) -> float:
    """Integrate f over the real line: adaptive Gauss-Kronrod on the band
    window plus the two tails."""
    pts = sorted(p for p in inner_points if -e_max < p < e_max)
    total, err = 0.0, 0.0
    v, e = quad(f, -e_max, e_max, points=pts, limit=400, epsabs=abs_tol / 4, epsrel=1e-11)
    total += v
    err += e
    for a, b in ((-math.inf, -e_max), (e_max, math.inf)):
        v, e = quad(f, a, b, limit=200, epsabs=abs_tol / 4, epsrel=1e-11)
        total += v
        err += e
    if err > max(abs_tol, 1e-13 * abs(total)) * 50:
        raise QuadratureError(f"quadrature error estimate {err:.3e} above tolerance {abs_tol:.0e}")
    return total


def _fermi(e, mu, beta):
    if math.isinf(beta):
        return 1.0 if e < mu else (0.5 if e == mu else 0.0)
    x = beta * (e - mu)
    if x > 700.0:
        return 0.0
    if x < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(x))


def lb_numeric(
    h: EffectiveHamiltonian,
    mu_l: float,
    mu_r: float,
    beta: float,
    abs_tol: float = 1e-9,
    gamma_left: float | None = None,
    gamma_right: float | None = None,
) -> TransportSummary:
    """Scattering current and zero-frequency noise by adaptive quadrature:

        J = int dE/2pi T (f_L - f_R)
        D = int dE/2pi { T(1-T)(f_L - f_R)^2 + T [f_L(1-f_L) + f_R(1-f_R)] }

    With beta = inf the Fermi factors become sharp windows.  Serves as the
    oracle for the residue route."""
    if mu_l < mu_r:
        raise ValueError("need mu_l >= mu_r")
    if beta <= 0.0:
        raise ValueError("beta must be > 0 (or inf)")
    e_max, pts = _band_points(h)

    def t_of(e):
        return transmission(h, e, gamma_left, gamma_right)

    if math.isinf(beta):
        lo, hi = mu_r, mu_l
        if lo >= hi:
            return _summary(0.0, 0.0)

        def window_quad(f):
            a = -e_max if math.isinf(lo) else lo
            b = e_max if math.isinf(hi) else hi
            inner = sorted(p for p in pts if a < p < b)
            total, err = 0.0, 0.0
            if a < b:
                v, e = quad(f, a, b, points=inner, limit=400, epsabs=abs_tol / 4, epsrel=1e-11)
                total, err = total + v, err + e
            if math.isinf(lo):
                v, e = quad(f, -math.inf, -e_max, limit=200, epsabs=abs_tol / 4, epsrel=1e-11)
                total, err = total + v, err + e
            if math.isinf(hi):
                v, e = quad(f, e_max, math.inf, limit=200, epsabs=abs_tol / 4, epsrel=1e-11)
                total, err = total + v, err + e
            if err > max(abs_tol, 1e-13 * abs(total)) * 50:
                raise QuadratureError(f"quadrature error estimate {err:.3e} above tolerance {abs_tol:.0e}")
            return total

        j = window_quad(t_of) / (2.0 * math.pi)
        d = window_quad(lambda e: (lambda t: t * (1.0 - t))(t_of(e))) / (2.0 * math.pi)
        return _summary(j, d)

    def j_integrand(e):
        return t_of(e) * (_fermi(e, mu_l, beta) - _fermi(e, mu_r, beta))

    def d_integrand(e):
        t = t_of(e)
        fl = _fermi(e, mu_l, beta)
        fr = _fermi(e, mu_r, beta)
        return t * (1.0 - t) * (fl - fr) ** 2 + t * (fl * (1.0 - fl) + fr * (1.0 - fr))

    pts_t = pts + [mu_l, mu_r]
    j = _quad_real_line(j_integrand, e_max + 30.0 / beta, pts_t, abs_tol) / (2.0 * math.pi)
    d = _quad_real_line(d_integrand, e_max + 30.0 / beta, pts_t, abs_tol) / (2.0 * math.pi)
    return _summary(j, max(d, 0.0))


def forward_only_noise(
    h: EffectiveHamiltonian,
    mu_l: float,
    mu_r: float,
    beta: float,
    abs_tol: float = 1e-9,
    check_tol: float = 1e-8,
) -> ForwardSplit:
    """Forward/backward decomposition of the counting statistics:

        J+ = int T f_L (1-f_R) / 2pi,
        D+ = int [T f_L(1-f_R) - T^2 (f_L(1-f_R))^2] / 2pi,
        J- = int T f_R (1-f_L) / 2pi,

    and the forward/backward covariance (two-counting-field route)
    cross_term = Cov(N+, N-)/t = -int T^2 f_L(1-f_R) f_R(1-f_L) / 2pi,
    which is <= 0 because forward and backward transfers exclude each
    other within one energy channel.  The identity
    D = D+ + D- - 2*cross_term is verified against lb_numeric."""
    if mu_l < mu_r:
        raise ValueError("need mu_l >= mu_r")
    e_max, pts = _band_points(h)
    if not math.isinf(beta):
        e_max += 30.0 / beta
        pts = pts + [mu_l, mu_r]

    def parts(e):
        t = transmission(h, e)
        fl = _fermi(e, mu_l, beta)
        fr = _fermi(e, mu_r, beta)
        return t, fl * (1.0 - fr), fr * (1.0 - fl)

    def q(f):
        return _quad_real_line(f, e_max, pts, abs_tol) / (2.0 * math.pi)

    j_plus = q(lambda e: (lambda t, pf, pb: t * pf)(*parts(e)))
    d_plus = q(lambda e: (lambda t, pf, pb: t * pf - (t * pf) ** 2)(*parts(e)))
    j_minus = q(lambda e: (lambda t, pf, pb: t * pb)(*parts(e)))
    d_minus = q(lambda e: (lambda t, pf, pb: t * pb - (t * pb) ** 2)(*parts(e)))
    cov = -q(lambda e: (lambda t, pf, pb: t * t * pf * pb)(*parts(e)))
    d_ref = lb_numeric(h, mu_l, mu_r, beta, abs_tol).diffusion
    d_sum = d_plus + d_minus - 2.0 * cov
    if abs(d_sum - d_ref) > check_tol * max(1.0, abs(d_ref)):
        raise QuadratureError(f"directional split violates D = D+ + D- - 2 Cov: {d_sum} vs {d_ref}")
    return ForwardSplit(j_plus, d_plus, j_minus, cov)


def wbl_finite_bias(j0: float, d0: float, sigma: float) -> TransportSummary:
    """Wide-band finite-bias dressing of the zero-T full-bias (J, D):

        J_Sigma = J tanh(Sigma/2),
        D_Sigma = D tanh(Sigma/2)^2 + J / (2 cosh(Sigma/2)^2).
    """
    if sigma < 0.0:
        raise ValueError("Sigma must be >= 0")
    th = math.tanh(sigma / 2.0)
    j = j0 * th
    if math.isinf(sigma):
        return _summary(j0, d0)
    d = d0 * th * th + j0 / (2.0 * math.cosh(sigma / 2.0) ** 2)
    return _summary(j, d)


def thermal_boxcar_diffusion(g: float, beta: float, sigma: float) -> float:
    """Thermal noise of the perfect boxcar (N -> infinity) beyond the
    wide-band limit: D = [tanh(2 beta g - Sigma) + tanh(2 beta g + Sigma)] / (2 pi beta)."""
    if beta <= 0.0:
        raise ValueError("beta must be > 0")
    return (math.tanh(2.0 * beta * g - sigma) + math.tanh(2.0 * beta * g + sigma)) / (2.0 * math.pi * beta)


def me_lb_gap_bound(t_max: float, gamma: float, delta_edge: float) -> float:
    """Crude bound |J_ME - J_LB| <= (||T||_inf / 2pi) (Gamma / Delta_edge)
    on the master-equation vs scattering current mismatch."""
    if delta_edge <= 0.0:
        raise ValueError("Delta_edge must be > 0")
    return t_max * gamma / (2.0 * math.pi * delta_edge)
