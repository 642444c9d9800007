"""Hot loop of the stochastic covariance-matrix trajectories.

The numba kernel advances one trajectory through a chunk of pre-drawn
uniform variates (one per step, Bernoulli thinning): each step either
applies one of the four jump channels or one RK4 step of the no-jump
Riccati flow, reprojecting the covariance onto the Slater manifold every
`reproject_every` steps.  Uniforms are generated outside the kernel by a
per-trajectory Philox stream, so trajectories are reproducible
independently of threading or chunk size.  Internally the covariance is
stored as separate real/imaginary planes, which lets LLVM vectorize the
RK4 arithmetic; the caller-facing state stays a complex matrix.  A
pure-numpy twin with the same consumption order backs environments
without numba.
"""
from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency normally
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


STATUS_CHUNK_DONE = 0
STATUS_FINISHED = 1
STATUS_STEP_TOO_LARGE = 2
STATUS_IMPOSSIBLE_JUMP = 3
STATUS_BUFFER_FULL = 4
STATUS_INVARIANT_LOST = 5

_RATE_FLOOR = -1e-8  # occupation this negative means the state left the physical manifold


@njit(cache=True, nogil=True, fastmath=True)
def _rhs_planes(cr, ci, diag, g, a1, an, hr, hi, outr, outi, buf):
    """Riccati right-hand side on real/imaginary planes:
        i(hC - (hC)^dag) + 2 a1 outer(u, u*) + 2 an outer(v, v*) - edge fixups
    with h tridiagonal, u = C[:, 0], v = C[:, -1] (valid for Hermitian C).
    The output is Hermitian; only the upper triangle is computed and
    mirrored.  `buf` caches the first/last covariance columns."""
    n = cr.shape[0]
    nm1 = n - 1
    for i in range(n):
        d = diag[i]
        if 0 < i < nm1:
            gm = g[i - 1]
            gp = g[i]
            for j in range(n):
                hr[i, j] = d * cr[i, j] + gm * cr[i - 1, j] + gp * cr[i + 1, j]
                hi[i, j] = d * ci[i, j] + gm * ci[i - 1, j] + gp * ci[i + 1, j]
        elif i == 0 and n > 1:
            gp = g[0]
            for j in range(n):
                hr[0, j] = d * cr[0, j] + gp * cr[1, j]
                hi[0, j] = d * ci[0, j] + gp * ci[1, j]
        elif i == nm1 and n > 1:
            gm = g[nm1 - 1]
            for j in range(n):
                hr[i, j] = d * cr[i, j] + gm * cr[i - 1, j]
                hi[i, j] = d * ci[i, j] + gm * ci[i - 1, j]
        else:  # n == 1
            hr[0, 0] = d * cr[0, 0]
            hi[0, 0] = d * ci[0, 0]
    b0r, b0i, bnr, bni = buf[0], buf[1], buf[2], buf[3]
    for j in range(n):
        b0r[j] = cr[j, 0]
        b0i[j] = ci[j, 0]
        bnr[j] = cr[j, nm1]
        bni[j] = ci[j, nm1]
    w1 = 2.0 * a1
    wn = 2.0 * an
    for i in range(n):
        ur = b0r[i]
        ui = b0i[i]
        vr = bnr[i]
        vi = bni[i]
        for j in range(i, n):
            tr_ = -(hi[i, j] + hi[j, i]) + w1 * (ur * b0r[j] + ui * b0i[j]) + wn * (vr * bnr[j] + vi * bni[j])
            ti_ = (hr[i, j] - hr[j, i]) + w1 * (ui * b0r[j] - ur * b0i[j]) + wn * (vi * bnr[j] - vr * bni[j])
            outr[i, j] = tr_
            outr[j, i] = tr_
            outi[i, j] = ti_
            outi[j, i] = -ti_
    for j in range(n):
        outr[0, j] -= a1 * cr[0, j]
        outi[0, j] -= a1 * ci[0, j]
        outr[j, 0] -= a1 * cr[j, 0]
        outi[j, 0] -= a1 * ci[j, 0]
        outr[nm1, j] -= an * cr[nm1, j]
        outi[nm1, j] -= an * ci[nm1, j]
        outr[j, nm1] -= an * cr[j, nm1]
        outi[j, nm1] -= an * ci[j, nm1]


@njit(cache=True, nogil=True, fastmath=True)
def _rk4_planes(cr, ci, diag, g, a1, an, dt, work, buf):
    """One classical RK4 step on the planes.  All stage matrices are
    Hermitian, so the combinations are computed on the upper triangle and
    mirrored -- the step preserves Hermiticity exactly by construction.
    `work` holds 12 scratch planes."""
    n = cr.shape[0]
    k1r, k1i = work[0], work[1]
    k2r, k2i = work[2], work[3]
    k3r, k3i = work[4], work[5]
    k4r, k4i = work[6], work[7]
    tr, ti = work[8], work[9]
    hrw, hiw = work[10], work[11]
    _rhs_planes(cr, ci, diag, g, a1, an, hrw, hiw, k1r, k1i, buf)
    half = 0.5 * dt
    for i in range(n):
        for j in range(i, n):
            ar = cr[i, j] + half * k1r[i, j]
            ai = ci[i, j] + half * k1i[i, j]
            tr[i, j] = ar
            tr[j, i] = ar
            ti[i, j] = ai
            ti[j, i] = -ai
        ti[i, i] = 0.0
    _rhs_planes(tr, ti, diag, g, a1, an, hrw, hiw, k2r, k2i, buf)
    for i in range(n):
        for j in range(i, n):
            ar = cr[i, j] + half * k2r[i, j]
            ai = ci[i, j] + half * k2i[i, j]
            tr[i, j] = ar
            tr[j, i] = ar
            ti[i, j] = ai
            ti[j, i] = -ai
        ti[i, i] = 0.0
    _rhs_planes(tr, ti, diag, g, a1, an, hrw, hiw, k3r, k3i, buf)
    for i in range(n):
        for j in range(i, n):
            ar = cr[i, j] + dt * k3r[i, j]
            ai = ci[i, j] + dt * k3i[i, j]
            tr[i, j] = ar
            tr[j, i] = ar
            ti[i, j] = ai
            ti[j, i] = -ai
        ti[i, i] = 0.0
    _rhs_planes(tr, ti, diag, g, a1, an, hrw, hiw, k4r, k4i, buf)
    sixth = dt / 6.0
    for i in range(n):
        for j in range(i, n):
            ar = cr[i, j] + sixth * (k1r[i, j] + 2.0 * (k2r[i, j] + k3r[i, j]) + k4r[i, j])
            ai = ci[i, j] + sixth * (k1i[i, j] + 2.0 * (k2i[i, j] + k3i[i, j]) + k4i[i, j])
            cr[i, j] = ar
            cr[j, i] = ar
            ci[i, j] = ai
            ci[j, i] = -ai
        ci[i, i] = 0.0


@njit(cache=True, nogil=True, fastmath=True)
def _jump_planes(cr, ci, kind, vr, vi):
    """Apply one jump channel in place on the planes.  Returns the
    particle-number change, or 0 when the channel is Pauli blocked."""
    n = cr.shape[0]
    nm1 = n - 1
    col = 0 if kind < 2 else nm1
    if kind == 0 or kind == 2:  # in-jumps: v = (1 - C)[:, col]
        den = 1.0 - cr[col, col]
        if den < 1e-12:
            return 0
        for i in range(n):
            vr[i] = -cr[i, col]
            vi[i] = -ci[i, col]
        vr[col] += 1.0
        dm = 1
    else:  # out-jumps: v = C[:, col]
        den = cr[col, col]
        if den < 1e-12:
            return 0
        for i in range(n):
            vr[i] = cr[i, col]
            vi[i] = ci[i, col]
        dm = -1
    scale = float(dm) / den
    for i in range(n):
        ar = scale * vr[i]
        ai = scale * vi[i]
        for j in range(n):
            # outer(v, v*)_{ij} = v_i conj(v_j)
            cr[i, j] += ar * vr[j] + ai * vi[j]
            ci[i, j] += ai * vr[j] - ar * vi[j]
    if kind >= 2:  # Jordan-Wigner flip of the last row and column
        for i in range(nm1):
            cr[nm1, i] = -cr[nm1, i]
            ci[nm1, i] = -ci[nm1, i]
            cr[i, nm1] = -cr[i, nm1]
            ci[i, nm1] = -ci[i, nm1]
    return dm


@njit(cache=True, nogil=True, fastmath=True)
def _reproject_planes(cr, ci, m, cwork):
    """Round the covariance back to a rank-m projector; returns the gap
    between the rounded-up and rounded-down singular values."""
    n = cr.shape[0]
    for i in range(n):
        for j in range(n):
            cwork[i, j] = complex(cr[i, j], ci[i, j])
    u, s, _ = np.linalg.svd(cwork)
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for k in range(m):
                acc += u[i, k] * np.conj(u[j, k])
            cr[i, j] = acc.real
            ci[i, j] = acc.imag
    if 0 < m < n:
        return s[m - 1] - s[m]
    return 1.0


# complex single-shot versions backing the public per-step API ------------

@njit(cache=True, nogil=True)
def _jump_inplace(c, kind, v):
    """Apply one jump channel in place on a complex matrix.  Returns the
    particle-number change, or 0 when the channel is Pauli blocked."""
    n = c.shape[0]
    nm1 = n - 1
    col = 0 if kind < 2 else nm1
    if kind == 0 or kind == 2:
        den = 1.0 - c[col, col].real
        if den < 1e-12:
            return 0
        for i in range(n):
            v[i] = -c[i, col]
        v[col] += 1.0
        dm = 1
    else:
        den = c[col, col].real
        if den < 1e-12:
            return 0
        for i in range(n):
            v[i] = c[i, col]
        dm = -1
    for i in range(n):
        vi = (float(dm) / den) * v[i]
        for j in range(n):
            c[i, j] += vi * np.conj(v[j])
    if kind >= 2:
        for i in range(nm1):
            c[nm1, i] = -c[nm1, i]
            c[i, nm1] = -c[i, nm1]
    return dm


@njit(cache=True, nogil=True)
def _reproject_inplace(c, m):
    n = c.shape[0]
    u, s, _ = np.linalg.svd(c)
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for k in range(m):
                acc += u[i, k] * np.conj(u[j, k])
            c[i, j] = acc
    if 0 < m < n:
        return s[m - 1] - s[m]
    return 1.0


@njit(cache=True, nogil=True)
def run_chunk(
    c,
    state_i,
    state_f,
    counts,
    tick_buf,
    diag,
    g,
    gl,
    gr,
    fl,
    fr,
    dt,
    us,
    reproject_every,
    use_ticks,
    tick_target,
    t_max,
    planes,
    work,
    vwork,
    cwork,
    buf,
):
    """Advance one trajectory through up to len(us) steps.

    state_i = [n_excitations, n_ticks, steps_since_reproject, total_steps],
    state_f = [time, min_reprojection_gap].  `planes` holds (C_re, C_im),
    `work` twelve scratch planes, `vwork` a (2, n) jump buffer, `cwork` a
    complex scratch matrix, `buf` a (4, n) column cache.  Returns
    (uniforms_consumed, status)."""
    n = c.shape[0]
    nm1 = n - 1
    cr, ci = planes[0], planes[1]
    for i in range(n):
        for j in range(n):
            cr[i, j] = c[i, j].real
            ci[i, j] = c[i, j].imag
    vr, vi = vwork[0], vwork[1]
    a1 = 0.5 * gl * (1.0 - 2.0 * fl)
    an = 0.5 * gr * (1.0 - 2.0 * fr)
    t = state_f[0]
    min_gap = state_f[1]
    m = state_i[0]
    n_ticks = state_i[1]
    since = state_i[2]
    steps = state_i[3]
    status = STATUS_CHUNK_DONE
    iu = 0
    nu = us.shape[0]
    while True:
        if use_ticks:
            if n_ticks >= tick_target:
                status = STATUS_FINISHED
                break
        elif t >= t_max - 1e-12 * dt:
            status = STATUS_FINISHED
            break
        if iu >= nu:
            break
        if n_ticks >= tick_buf.shape[0]:
            status = STATUS_BUFFER_FULL
            break
        c00 = cr[0, 0]
        cnn = cr[nm1, nm1]
        if c00 < _RATE_FLOOR or c00 > 1.0 - _RATE_FLOOR or cnn < _RATE_FLOOR or cnn > 1.0 - _RATE_FLOOR:
            status = STATUS_INVARIANT_LOST
            break
        if c00 < 0.0:
            c00 = 0.0
        elif c00 > 1.0:
            c00 = 1.0
        if cnn < 0.0:
            cnn = 0.0
        elif cnn > 1.0:
            cnn = 1.0
        r0 = gl * fl * (1.0 - c00)
        r1 = gl * (1.0 - fl) * c00
        r2 = gr * fr * (1.0 - cnn)
        r3 = gr * (1.0 - fr) * cnn
        total = r0 + r1 + r2 + r3
        if total * dt > 0.1:
            status = STATUS_STEP_TOO_LARGE
            break
        u = us[iu]
        iu += 1
        if u < total * dt:
            thr = u / dt
            if thr < r0:
                kind = 0
            elif thr < r0 + r1:
                kind = 1
            elif thr < r0 + r1 + r2:
                kind = 2
            else:
                kind = 3
            dm = _jump_planes(cr, ci, kind, vr, vi)
            if dm == 0:
                status = STATUS_IMPOSSIBLE_JUMP
                break
            m += dm
            counts[kind] += 1
            t += dt
            if kind == 3:
                tick_buf[n_ticks] = t
                n_ticks += 1
        else:
            _rk4_planes(cr, ci, diag, g, a1, an, dt, work, buf)
            t += dt
        steps += 1
        since += 1
        if since >= reproject_every:
            gap = _reproject_planes(cr, ci, m, cwork)
            if gap < min_gap:
                min_gap = gap
            since = 0
    for i in range(n):
        for j in range(n):
            c[i, j] = complex(cr[i, j], ci[i, j])
    state_f[0] = t
    state_f[1] = min_gap
    state_i[0] = m
    state_i[1] = n_ticks
    state_i[2] = since
    state_i[3] = steps
    return iu, status
