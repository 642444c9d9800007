"""Stochastic quantum trajectories of the conditional covariance matrix:
no-jump Riccati flow (RK4), four jump channels with the Jordan-Wigner sign
matrix, SVD reprojection, tick records, and waiting-time statistics."""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chain import ChainSpec, stream
from .errors import ImpossibleJumpError, InsufficientDataError, InvalidSpecError, TickchainError
from .state import CovarianceState

__all__ = [
    "JumpKind",
    "TickRecord",
    "WaitingTimeTable",
    "WaitHistograms",
    "default_dt",
    "no_jump_step",
    "jump_rates",
    "apply_jump",
    "reproject",
    "simulate_trajectory",
    "simulate_ensemble",
    "ensemble_covariance",
    "waiting_time_stats",
    "mc_number_variance",
    "conditional_waiting_histogram",
    "wigner_dyson_pdf",
    "wigner_dyson_fit",
    "exponential_fit",
]

_CHUNK = 1 << 16


class JumpKind(enum.IntEnum):
    """The four jump channels; RIGHT_OUT defines a tick."""

    LEFT_IN = 0
    LEFT_OUT = 1
    RIGHT_IN = 2
    RIGHT_OUT = 3


@dataclass(eq=False)
class TickRecord:
    """Ordered right-out jump times of one trajectory plus its sampling
    metadata."""

    tick_times: np.ndarray
    aux_jumps: np.ndarray  # counts per JumpKind
    seed: int
    dt: float
    t_end: float
    min_reprojection_gap: float = 1.0

    def validate(self) -> None:
        t = self.tick_times
        if t.size and (np.any(np.diff(t) <= 0.0) or t[0] < 0.0 or t[-1] > self.t_end + 1e-9):
            raise InvalidSpecError("tick times must be strictly increasing within [0, t_end]")

    @property
    def n_ticks(self) -> int:
        return int(self.tick_times.size)


def default_dt(spec: ChainSpec) -> float:
    """Integration step 0.01 / max(Gamma, 2 max g)."""
    gmax = float(spec.couplings.max()) if spec.couplings.size else 0.0
    return 0.01 / max(spec.boundary_rate, 2.0 * gmax)


def _riccati_rhs(c: np.ndarray, h: np.ndarray, a1: float, an: float) -> np.ndarray:
    hc = h @ c
    out = 1j * (hc - hc.conj().T)
    out += 2.0 * a1 * np.outer(c[:, 0], c[0, :]) + 2.0 * an * np.outer(c[:, -1], c[-1, :])
    out[0, :] -= a1 * c[0, :]
    out[:, 0] -= a1 * c[:, 0]
    out[-1, :] -= an * c[-1, :]
    out[:, -1] -= an * c[:, -1]
    return out


def no_jump_step(state: CovarianceState, h_eff, f_l: float, f_r: float, dt: float) -> CovarianceState:
    """One RK4 step of the no-jump Riccati flow, re-Hermitized, with the
    state invariants checked afterwards."""
    gl, gr = h_eff.gamma_left, h_eff.gamma_right
    if dt > 0.1 / max(gl, gr):
        raise InvalidSpecError(f"dt = {dt} too large for boundary rate {max(gl, gr)}")
    h = h_eff.hermitian_part
    a1 = 0.5 * gl * (1.0 - 2.0 * f_l)
    an = 0.5 * gr * (1.0 - 2.0 * f_r)
    c = state.matrix
    k1 = _riccati_rhs(c, h, a1, an)
    k2 = _riccati_rhs(c + 0.5 * dt * k1, h, a1, an)
    k3 = _riccati_rhs(c + 0.5 * dt * k2, h, a1, an)
    k4 = _riccati_rhs(c + dt * k3, h, a1, an)
    out = c + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    out = 0.5 * (out + out.conj().T)
    new = CovarianceState(out, state.n_excitations)
    new.validate(herm_tol=1e-10, eig_tol=1e-6, purity_tol=1e-4)
    return new


def jump_rates(state: CovarianceState, f_l: float, f_r: float, gamma: float) -> np.ndarray:
    """Channel rates (LeftIn, LeftOut, RightIn, RightOut) =
    Gamma (f_L(1-C11), (1-f_L)C11, f_R(1-C_NN), (1-f_R)C_NN)."""
    c00 = state.matrix[0, 0].real
    cnn = state.matrix[-1, -1].real
    rates = gamma * np.array([f_l * (1.0 - c00), (1.0 - f_l) * c00, f_r * (1.0 - cnn), (1.0 - f_r) * cnn])
    if rates.min() < -1e-12:
        raise TickchainError(f"negative jump rate {rates.min():.3e}")
    return np.clip(rates, 0.0, None)


def apply_jump(state: CovarianceState, kind: JumpKind) -> CovarianceState:
    """Conditional state update for one jump; trace changes by exactly +-1.
    Raises ImpossibleJumpError on a Pauli-blocked channel."""
    c = state.matrix.copy()
    n = c.shape[0]
    v = np.empty(n, dtype=complex)
    dm = _kernels._jump_inplace.py_func(c, int(kind), v) if hasattr(_kernels._jump_inplace, "py_func") else _kernels._jump_inplace(c, int(kind), v)
    if dm == 0:
        raise ImpossibleJumpError(f"channel {JumpKind(kind).name} blocked (denominator < 1e-12)")
    m = None if state.n_excitations is None else state.n_excitations + dm
    return CovarianceState(c, m)


def reproject(state: CovarianceState, gap_warn: float = 1e-3) -> CovarianceState:
    """Round the singular values back to a rank-M projector (pure
    trajectories only).  Warns when the spectral gap at the rounding
    threshold is below `gap_warn` (integration step too coarse)."""
    if state.n_excitations is None:
        raise InvalidSpecError("reprojection applies to pure trajectories only")
    c = state.matrix.copy()
    m = state.n_excitations
    gap = _kernels._reproject_inplace.py_func(c, m) if hasattr(_kernels._reproject_inplace, "py_func") else _kernels._reproject_inplace(c, m)
    if gap < gap_warn:
        warnings.warn(f"reprojection gap {gap:.2e} below {gap_warn:.0e}: integration step too coarse", stacklevel=2)
    return CovarianceState(c, m)


def _python_chunk(c, state_i, state_f, counts, tick_buf, diag, g, gl, gr, fl, fr, dt, us,
                  reproject_every, use_ticks, tick_target, t_max):
    """Numpy twin of the numba kernel with identical uniform consumption."""
    n = c.shape[0]
    h = np.diag(diag).astype(complex)
    idx = np.arange(n - 1)
    h[idx, idx + 1] = g
    h[idx + 1, idx] = g
    a1 = 0.5 * gl * (1.0 - 2.0 * fl)
    an = 0.5 * gr * (1.0 - 2.0 * fr)
    t, min_gap = state_f
    m, n_ticks, since, steps = (int(x) for x in state_i)
    status = _kernels.STATUS_CHUNK_DONE
    iu = 0
    nu = us.shape[0]
    v = np.empty(n, dtype=complex)
    while True:
        if use_ticks:
            if n_ticks >= tick_target:
                status = _kernels.STATUS_FINISHED
                break
        elif t >= t_max - 1e-12 * dt:
            status = _kernels.STATUS_FINISHED
            break
        if iu >= nu:
            break
        if n_ticks >= tick_buf.shape[0]:
            status = _kernels.STATUS_BUFFER_FULL
            break
        c00 = min(max(c[0, 0].real, 0.0), 1.0)
        cnn = min(max(c[-1, -1].real, 0.0), 1.0)
        if c[0, 0].real < _kernels._RATE_FLOOR or c[-1, -1].real < _kernels._RATE_FLOOR:
            status = _kernels.STATUS_INVARIANT_LOST
            break
        r = np.array([gl * fl * (1.0 - c00), gl * (1.0 - fl) * c00, gr * fr * (1.0 - cnn), gr * (1.0 - fr) * cnn])
        total = r.sum()
        if total * dt > 0.1:
            status = _kernels.STATUS_STEP_TOO_LARGE
            break
        u = us[iu]
        iu += 1
        if u < total * dt:
            thr = u / dt
            cum = np.cumsum(r)
            kind = int(np.searchsorted(cum, thr, side="right"))
            dm = _jump_np(c, kind, v)
            if dm == 0:
                status = _kernels.STATUS_IMPOSSIBLE_JUMP
                break
            m += dm
            counts[kind] += 1
            t += dt
            if kind == 3:
                tick_buf[n_ticks] = t
                n_ticks += 1
        else:
            k1 = _riccati_rhs(c, h, a1, an)
            k2 = _riccati_rhs(c + 0.5 * dt * k1, h, a1, an)
            k3 = _riccati_rhs(c + 0.5 * dt * k2, h, a1, an)
            k4 = _riccati_rhs(c + dt * k3, h, a1, an)
            c += (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            c[:] = 0.5 * (c + c.conj().T)
            t += dt
        steps += 1
        since += 1
        if since >= reproject_every:
            u_svd, s, _ = np.linalg.svd(c)
            c[:] = u_svd[:, :m] @ u_svd[:, :m].conj().T
            gap = (s[m - 1] - s[m]) if 0 < m < n else 1.0
            min_gap = min(min_gap, gap)
            since = 0
    state_f[0] = t
    state_f[1] = min_gap
    state_i[:] = (m, n_ticks, since, steps)
    return iu, status


def _jump_np(c, kind, v):
    n = c.shape[0]
    if kind == 0:
        den = 1.0 - c[0, 0].real
        if den < 1e-12:
            return 0
        v[:] = -c[:, 0]
        v[0] += 1.0
        dm = 1
    elif kind == 1:
        den = c[0, 0].real
        if den < 1e-12:
            return 0
        v[:] = c[:, 0]
        dm = -1
    elif kind == 2:
        den = 1.0 - c[-1, -1].real
        if den < 1e-12:
            return 0
        v[:] = -c[:, -1]
        v[-1] += 1.0
        dm = 1
    else:
        den = c[-1, -1].real
        if den < 1e-12:
            return 0
        v[:] = c[:, -1]
        dm = -1
    c += (float(dm) / den) * np.outer(v, v.conj())
    if kind >= 2:
        c[-1, :-1] *= -1.0
        c[:-1, -1] *= -1.0
    return dm


def _engine() -> str:
    env = os.environ.get("TICKCHAIN_ENGINE", "")
    if env in ("numba", "numpy"):
        return env
    return "numba" if _kernels.HAVE_NUMBA else "numpy"


def _run_trajectory(spec: ChainSpec, *, n_ticks=None, t_max=None, dt=None, seed=0,
                    reproject_every=50, shifts=None, chunk=_CHUNK, engine=None):
    if (n_ticks is None) == (t_max is None):
        raise InvalidSpecError("specify exactly one of n_ticks or t_max")
    if dt is None:
        dt = default_dt(spec)
    n = spec.n_sites
    g = np.asarray(spec.couplings, dtype=float)
    diag = np.zeros(n) if shifts is None else np.asarray(shifts, dtype=float)
    gam = spec.boundary_rate
    fl, fr = spec.occ_left, spec.occ_right
    if gam * 2.0 * dt > 0.1:
        raise InvalidSpecError(f"dt = {dt} too large: total jump rate times dt may exceed 0.1")
    rng = stream(seed)
    c = np.zeros((n, n), dtype=complex)
    state_i = np.zeros(4, dtype=np.int64)
    state_f = np.array([0.0, 1.0])
    counts = np.zeros(4, dtype=np.int64)
    cap = int(n_ticks) if n_ticks is not None else max(int(gam * t_max * 0.6) + 64, 256)
    tick_buf = np.empty(cap)
    use_ticks = n_ticks is not None
    target = int(n_ticks) if use_ticks else 0
    tmax_val = float(t_max) if t_max is not None else 0.0
    eng = engine or _engine()
    if eng == "numba":
        planes = np.empty((2, n, n))
        work = np.empty((12, n, n))
        vwork = np.empty((2, n))
        cwork = np.empty((n, n), dtype=complex)
        buf = np.empty((4, n))
    while True:
        us = rng.random(chunk)
        if eng == "numba":
            consumed, status = _kernels.run_chunk(
                c, state_i, state_f, counts, tick_buf, diag, g, gam, gam, fl, fr, dt, us,
                int(reproject_every), use_ticks, target, tmax_val, planes, work, vwork, cwork, buf,
            )
        else:
            consumed, status = _python_chunk(
                c, state_i, state_f, counts, tick_buf, diag, g, gam, gam, fl, fr, dt, us,
                int(reproject_every), use_ticks, target, tmax_val,
            )
        if status == _kernels.STATUS_FINISHED:
            break
        if status == _kernels.STATUS_CHUNK_DONE:
            continue
        if status == _kernels.STATUS_BUFFER_FULL:
            tick_buf = np.concatenate([tick_buf, np.empty(tick_buf.size)])
            continue
        if status == _kernels.STATUS_STEP_TOO_LARGE:
            raise InvalidSpecError("total jump rate times dt exceeded 0.1: decrease dt")
        if status == _kernels.STATUS_IMPOSSIBLE_JUMP:
            raise ImpossibleJumpError("sampled a Pauli-blocked channel: state invariants lost")
        raise TickchainError("trajectory left the physical manifold (occupation outside [0,1])")
    n_rec = int(state_i[1])
    record = TickRecord(tick_buf[:n_rec].copy(), counts, seed, dt, float(state_f[0]), float(state_f[1]))
    state = CovarianceState(c.copy(), int(state_i[0]))
    return record, state


def simulate_trajectory(spec: ChainSpec, *, n_ticks=None, t_max=None, dt=None, seed=0,
                        reproject_every=50, discard_first=0, shifts=None, engine=None):
    """One trajectory from the vacuum.  Stops after `n_ticks` recorded
    ticks (including the `discard_first` ones, which are dropped from the
    returned record) or at `t_max`.  Deterministic per (seed, dt,
    reproject_every)."""
    total = None if n_ticks is None else int(n_ticks) + int(discard_first)
    record, _ = _run_trajectory(
        spec, n_ticks=total, t_max=t_max, dt=dt, seed=seed,
        reproject_every=reproject_every, shifts=shifts, engine=engine,
    )
    if discard_first:
        record = TickRecord(
            record.tick_times[discard_first:], record.aux_jumps, record.seed,
            record.dt, record.t_end, record.min_reprojection_gap,
        )
    record.validate()
    if record.min_reprojection_gap < 1e-3:
        warnings.warn(
            f"reprojection gap reached {record.min_reprojection_gap:.2e}: integration step too coarse",
            stacklevel=2,
        )
    return record


def simulate_ensemble(spec: ChainSpec, n_trajectories: int, *, n_ticks=None, t_max=None, dt=None,
                      seed=0, reproject_every=50, shifts=None, threads=None, engine=None):
    """Independent trajectories with per-trajectory Philox streams
    (seed, index); results are ordered by index and independent of the
    thread schedule."""
    threads = threads or min(os.cpu_count() or 1, n_trajectories)
    seeds = [int(stream(seed, i).integers(0, 2**63 - 1)) for i in range(n_trajectories)]

    def one(i: int) -> TickRecord:
        rec, _ = _run_trajectory(
            spec, n_ticks=n_ticks, t_max=t_max, dt=dt, seed=seeds[i],
            reproject_every=reproject_every, shifts=shifts, engine=engine,
        )
        return rec

    if threads <= 1:
        return [one(i) for i in range(n_trajectories)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(n_trajectories)))


def ensemble_covariance(spec: ChainSpec, t: float, n_trajectories: int, *, dt=None, seed=0,
                        reproject_every=50, threads=None, engine=None) -> np.ndarray:
    """Trajectory-averaged covariance matrix at time t (vacuum start)."""
    threads = threads or min(os.cpu_count() or 1, n_trajectories)
    seeds = [int(stream(seed, i).integers(0, 2**63 - 1)) for i in range(n_trajectories)]

    def one(i: int) -> np.ndarray:
        _, st = _run_trajectory(spec, t_max=t, dt=dt, seed=seeds[i],
                                reproject_every=reproject_every, engine=engine)
        return st.matrix

    if threads <= 1:
        mats = [one(i) for i in range(n_trajectories)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mats = list(pool.map(one, range(n_trajectories)))
    return np.mean(mats, axis=0)


# -- estimators ------------------------------------------------------------

@dataclass(eq=False)
class WaitingTimeTable:
    """Stationary E[T_n], Var[T_n] and the jackknife standard error of the
    variance, per requested n."""

    n: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    stderr: np.ndarray


def _jackknife_variance(counts: np.ndarray, sums: np.ndarray, sumsqs: np.ndarray):
    """Pooled (ddof=1) variance from per-trajectory tallies and its
    leave-one-trajectory-out jackknife standard error."""
    n_tot = counts.sum()
    s_tot = sums.sum()
    ss_tot = sumsqs.sum()
    if n_tot < 2:
        raise InsufficientDataError("need at least two samples")
    var = (ss_tot - s_tot**2 / n_tot) / (n_tot - 1)
    keep = counts > 0
    if keep.sum() < 2:
        return var, math.inf
    loo = []
    for j in np.nonzero(keep)[0]:
        n_j = n_tot - counts[j]
        if n_j < 2:
            continue
        s_j = s_tot - sums[j]
        ss_j = ss_tot - sumsqs[j]
        loo.append((ss_j - s_j**2 / n_j) / (n_j - 1))
    loo = np.asarray(loo)
    t = loo.size
    if t < 2:
        return var, math.inf
    se = math.sqrt(max((t - 1) / t * ((loo - loo.mean()) ** 2).sum(), 0.0))
    return var, se


def waiting_time_stats(records, n_values, discard_first: int = 200) -> WaitingTimeTable:
    """Stationary waiting-time table: per trajectory, T_n samples are the
    non-overlapping window sums t_{k+n} - t_k after discarding the first
    `discard_first` ticks; pooled variance with jackknife errors over
    trajectories."""
    n_values = np.asarray(sorted(int(v) for v in n_values), dtype=int)
    if n_values.size == 0 or n_values.min() < 1:
        raise InvalidSpecError("n_values must be positive integers")
    needed = discard_first + n_values.max() + 1
    for r in records:
        if r.n_ticks < needed:
            raise InsufficientDataError(f"record has {r.n_ticks} ticks; need >= {needed}")
    post_burn = [r.tick_times[discard_first:] for r in records]
    n_rec = len(records)
    means = np.empty(n_values.size)
    variances = np.empty(n_values.size)
    errs = np.empty(n_values.size)
    for i, n in enumerate(n_values):
        counts = np.zeros(n_rec)
        sums = np.zeros(n_rec)
        sumsqs = np.zeros(n_rec)
        for j, ticks in enumerate(post_burn):
            k = (ticks.size - 1) // n
            if k < 1:
                continue
            w = ticks[n * np.arange(1, k + 1)] - ticks[n * np.arange(0, k)]
            counts[j] = w.size
            sums[j] = w.sum()
            sumsqs[j] = (w**2).sum()
        means[i] = sums.sum() / counts.sum()
        variances[i], errs[i] = _jackknife_variance(counts, sums, sumsqs)
    return WaitingTimeTable(n_values, means, variances, errs)


def mc_number_variance(records, window_lengths, discard_first: int = 200):
    """Var[N_t] estimated from non-overlapping windows of length t placed
    after the burn-in tick; returns (t, variance, jackknife stderr)."""
    window_lengths = np.asarray(window_lengths, dtype=float)
    n_rec = len(records)
    variances = np.empty(window_lengths.size)
    errs = np.empty(window_lengths.size)
    for i, w in enumerate(window_lengths):
        counts = np.zeros(n_rec)
        sums = np.zeros(n_rec)
        sumsqs = np.zeros(n_rec)
        for j, r in enumerate(records):
            if r.n_ticks <= discard_first:
                raise InsufficientDataError("record shorter than the burn-in")
            t0 = r.tick_times[discard_first]
            n_win = int((r.tick_times[-1] - t0) / w)
            if n_win < 1:
                continue
            edges = t0 + w * np.arange(n_win + 1)
            k = np.diff(np.searchsorted(r.tick_times, edges, side="right"))
            counts[j] = k.size
            sums[j] = k.sum()
            sumsqs[j] = (k.astype(float) ** 2).sum()
        variances[i], errs[i] = _jackknife_variance(counts, sums, sumsqs)
    return window_lengths, variances, errs


@dataclass(eq=False)
class WaitHistograms:
    """Waiting-time histogram plus the same conditioned on the previous
    wait being faster/slower than the mean."""

    bin_edges: np.ndarray
    density: np.ndarray
    density_fast: np.ndarray
    density_slow: np.ndarray
    mean: float
    mean_fast: float
    mean_slow: float
    n_samples: int


def _pooled_waits(records, discard_first: int):
    pairs_prev = []
    pairs_cur = []
    waits_all = []
    for r in records:
        ticks = r.tick_times[discard_first:]
        if ticks.size < 3:
            continue
        w = np.diff(ticks)
        waits_all.append(w)
        pairs_prev.append(w[:-1])
        pairs_cur.append(w[1:])
    if not waits_all:
        raise InsufficientDataError("no waiting-time samples after burn-in")
    return np.concatenate(waits_all), np.concatenate(pairs_prev), np.concatenate(pairs_cur)


def conditional_waiting_histogram(records, discard_first: int = 200, bins: int = 60) -> WaitHistograms:
    """Histograms of T_1 over [0, 5/J] (J estimated from the pooled mean
    wait), unconditional and conditioned on the previous wait."""
    waits, prev, cur = _pooled_waits(records, discard_first)
    if waits.size < 10_000:
        warnings.warn(f"only {waits.size} waiting-time samples; default binning assumes >= 10^4", stacklevel=2)
    mean = waits.mean()
    edges = np.linspace(0.0, 5.0 * mean, bins + 1)
    fast = cur[prev < mean]
    slow = cur[prev >= mean]
    if fast.size == 0 or slow.size == 0:
        raise InsufficientDataError("conditioning classes are empty")
    dens = np.histogram(waits, bins=edges, density=True)[0]
    dens_f = np.histogram(fast, bins=edges, density=True)[0]
    dens_s = np.histogram(slow, bins=edges, density=True)[0]
    return WaitHistograms(edges, dens, dens_f, dens_s, float(mean), float(fast.mean()), float(slow.mean()), int(waits.size))


def wigner_dyson_pdf(s):
    """Unit-mean beta = 2 level-spacing surmise (32/pi^2) s^2 e^{-4 s^2/pi}."""
    s = np.asarray(s, dtype=float)
    return (32.0 / math.pi**2) * s * s * np.exp(-4.0 * s * s / math.pi)


def _scale_fit(centers, density, pdf) -> tuple[float, float]:
    """Least-squares scale fit density(T) ~ pdf(T/tau)/tau in dimensionless
    units; goodness is the mean squared residual on the unit-mean scale."""
    centers = np.asarray(centers, dtype=float)
    density = np.asarray(density, dtype=float)
    mass = np.trapezoid(density, centers)
    if not 0.5 < mass < 1.5:
        raise InvalidSpecError("histogram must be normalized as a density")
    scale0 = np.trapezoid(centers * density, centers)

    def ssr(tau: float) -> float:
        model = pdf(centers / tau) / tau
        return float(np.mean((scale0 * (density - model)) ** 2))

    from scipy.optimize import minimize_scalar

    res = minimize_scalar(ssr, bounds=(0.3 * scale0, 3.0 * scale0), method="bounded",
                          options={"xatol": 1e-10 * scale0})
    return float(res.x), float(res.fun)


def wigner_dyson_fit(centers, density) -> tuple[float, float]:
    """Fit the beta = 2 surmise to a normalized waiting-time histogram;
    returns (scale, goodness) with goodness the dimensionless mean squared
    residual."""
    return _scale_fit(centers, density, wigner_dyson_pdf)


def exponential_fit(centers, density) -> tuple[float, float]:
    """Same scale fit against the exponential density (Poisson ticks)."""
    return _scale_fit(centers, density, lambda s: np.exp(-np.asarray(s)))
