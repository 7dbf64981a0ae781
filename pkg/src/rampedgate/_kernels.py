"""Scalar hot-path kernels shared by the numba and numpy backends.

Everything in this module is written as plain scalar-loop Python so that it
can be compiled with ``numba.njit`` (see :mod:`rampedgate._backend`).  When
the numpy backend is selected the same functions run uncompiled; the
propagator then prefers its vectorized numpy right-hand side and only calls
these for scalar coefficient evaluation.

Units: all times in microseconds, all angular frequencies in rad/us, so that
typical coefficients are O(1)-O(40) inside the integrator.

Packed schedule layout
----------------------
Amplitude envelope segments ``segs`` are float64 arrays of shape (n, 4) with
rows ``[t0, t1, kind, unused]`` and kinds

    0 constant 0, 1 constant 1, 2 Blackman-Harris rise, 3 BH fall.

Motional envelope segments ``m_segs`` have shape (n, 12) with rows
``[t0, t1, kind, p0..p8]`` and kinds

    0 constant value p0,
    1 quintic polynomial sum(p_k * s**k) in s = (t-t0)/(t1-t0),
    2 constant-adiabaticity core (p0=alpha*Dc [1/us], p1=Dc, p2=D1,
      p3=1/(D0-D1), detunings in rad/us),
    3 sine-squared fall cos^2(pi s/2), 4 sine-squared rise sin^2(pi s/2).

``m_offs[k]`` caches the envelope integral at each segment start so that the
accumulated phase is evaluated in closed form, never by re-integration.

Coefficient rows (one per Hamiltonian term, width 14):

    [amp_re, amp_im, use_g, use_mu, bessel_n, index_peak,
     trig1_kind, trig1_w, trig2_kind, trig2_w,
     phase_sign, mode_idx, lin_w, phase_const]

evaluating to

    amp * env_g(t)^use_g * env_mu(t)^use_mu * J_n(index_peak*env_mu(t))
        * trig1(w1*t) * trig2(w2*t)
        * exp(i*sign*(phi_mode(t) + lin_w*t + phase_const))

with trig kinds 0 none, 1 cos, 2 sin, and t the global time (envelopes and
phi are evaluated at t - arm_start).
"""

import math

import numpy as np

from ._backend import maybe_njit

# 4-term Blackman-Harris window coefficients (-92 dB sidelobes)
BH_A0 = 0.35875
BH_A1 = 0.48829
BH_A2 = 0.14128
BH_A3 = 0.01168
# window value at the edge, removed by rescaling
BH_EDGE = BH_A0 - BH_A1 + BH_A2 - BH_A3


@maybe_njit
def bh_window(u):
    """Raw 4-term Blackman-Harris window on u in [0, 1], peak 1 at u=1/2."""
    return (
        BH_A0
        - BH_A1 * math.cos(2.0 * math.pi * u)
        + BH_A2 * math.cos(4.0 * math.pi * u)
        - BH_A3 * math.cos(6.0 * math.pi * u)
    )


@maybe_njit
def bh_half(s):
    """Rising half of the window, rescaled to span exactly [0, 1] on s in [0, 1]."""
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    return (bh_window(0.5 * s) - BH_EDGE) / (1.0 - BH_EDGE)


@maybe_njit
def bessel_jn(n, x):
    """Bessel J_n(x) for integer n >= 0, |x| <= 60, abs error < 1e-12.

    Power series for small |x|, Miller backward recurrence otherwise.
    """
    if n < 0:
        raise ValueError("order must be >= 0")
    sign = 1.0
    if x < 0.0:
        x = -x
        if n % 2 == 1:
            sign = -1.0
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x < 5.0:
        # sum_k (-1)^k (x/2)^(n+2k) / (k! (n+k)!)
        half = 0.5 * x
        term = 1.0
        for k in range(1, n + 1):
            term *= half / k
        total = term
        k = 1
        while True:
            term *= -(half * half) / (k * (n + k))
            total += term
            if abs(term) < 1e-18 * (abs(total) + 1e-30) or k > 200:
                break
            k += 1
        return sign * total
    # Miller's algorithm: recur downward from a start order with margin,
    # normalize with J_0 + 2 sum J_2k = 1.
    m = int(max(n, x)) + 42
    if m % 2 == 1:
        m += 1
    jp = 0.0
    jc = 1e-300
    norm = 0.0
    result = 0.0
    for k in range(m, 0, -1):
        jm = (2.0 * k / x) * jc - jp
        jp = jc
        jc = jm
        if k - 1 == n:
            result = jc
        if (k - 1) % 2 == 0:
            norm += 2.0 * jc
        # rescale to avoid overflow
        if abs(jc) > 1e250:
            jc *= 1e-250
            jp *= 1e-250
            norm *= 1e-250
            result *= 1e-250
    norm -= jc  # J_0 counted twice
    return sign * result / norm


@maybe_njit
def amp_env(t, segs):
    """Normalized amplitude envelope in [0, 1] at local time t (us).

    Outside the covered interval the edge segment value applies; built arms
    start and end with the drives off, so that value is zero.
    """
    n = segs.shape[0]
    if n == 0:
        return 0.0
    if t < segs[0, 0]:
        t = segs[0, 0]
    elif t > segs[n - 1, 1]:
        t = segs[n - 1, 1]
    for k in range(n):
        if t <= segs[k, 1] or k == n - 1:
            t0 = segs[k, 0]
            t1 = segs[k, 1]
            kind = int(segs[k, 2])
            if kind == 0:
                return 0.0
            if kind == 1:
                return 1.0
            s = (t - t0) / (t1 - t0)
            if s < 0.0:
                s = 0.0
            if s > 1.0:
                s = 1.0
            if kind == 2:
                return bh_half(s)
            return bh_half(1.0 - s)
    return 0.0


@maybe_njit
def _menv_seg(t, row):
    t0 = row[0]
    t1 = row[1]
    kind = int(row[2])
    if kind == 0:
        return row[3]
    s = (t - t0) / (t1 - t0)
    if s < 0.0:
        s = 0.0
    if s > 1.0:
        s = 1.0
    if kind == 1:
        v = 0.0
        for k in range(5, -1, -1):
            v = v * s + row[3 + k]
        return v
    if kind == 2:
        kap = row[3]
        dc = row[4]
        d1 = row[5]
        inv_depth = row[6]
        return (dc / (1.0 - kap * (t - t0)) - d1) * inv_depth
    if kind == 3:
        c = math.cos(0.5 * math.pi * s)
        return c * c
    c = math.sin(0.5 * math.pi * s)
    return c * c


@maybe_njit
def _menv_seg_int(t, row):
    """Integral of the segment envelope from its start to t."""
    t0 = row[0]
    t1 = row[1]
    kind = int(row[2])
    dt = t - t0
    if kind == 0:
        return row[3] * dt
    length = t1 - t0
    s = dt / length
    if s < 0.0:
        s = 0.0
    if s > 1.0:
        s = 1.0
    if kind == 1:
        v = 0.0
        for k in range(5, -1, -1):
            v = v * s + row[3 + k] / (k + 1.0)
        return v * s * length
    if kind == 2:
        kap = row[3]
        dc = row[4]
        d1 = row[5]
        inv_depth = row[6]
        return (-(dc / kap) * math.log1p(-kap * dt) - d1 * dt) * inv_depth
    if kind == 3:
        return length * (0.5 * s + math.sin(math.pi * s) / (2.0 * math.pi))
    return length * (0.5 * s - math.sin(math.pi * s) / (2.0 * math.pi))


@maybe_njit
def menv(t, m_segs):
    """Motional ramp envelope e(t) (1 far-detuned, 0 near-detuned)."""
    n = m_segs.shape[0]
    if t <= m_segs[0, 0]:
        return _menv_seg(m_segs[0, 0], m_segs[0])
    for k in range(n):
        if t <= m_segs[k, 1] or k == n - 1:
            return _menv_seg(t, m_segs[k])
    return 0.0


@maybe_njit
def menv_int(t, m_segs, m_offs):
    """Envelope integral E(t) = int_0^t e(t') dt' (us)."""
    n = m_segs.shape[0]
    if t <= m_segs[0, 0]:
        return _menv_seg(m_segs[0, 0], m_segs[0]) * (t - m_segs[0, 0])
    for k in range(n):
        if t <= m_segs[k, 1]:
            return m_offs[k] + _menv_seg_int(t, m_segs[k])
    last = n - 1
    edge = m_offs[last] + _menv_seg_int(m_segs[last, 1], m_segs[last])
    return edge + _menv_seg(m_segs[last, 1], m_segs[last]) * (t - m_segs[last, 1])


@maybe_njit
def phi_mode(t_loc, w0, w1, m_segs, m_offs, phi0):
    """Accumulated motional phase phi(t) = phi0 + w0*t + w1*E(t) (rad)."""
    return phi0 + w0 * t_loc + w1 * menv_int(t_loc, m_segs, m_offs)


@maybe_njit
def coef_eval(t, arm_start, row, mode_w0, mode_w1, phi0s, g_segs, mu_segs, m_segs, m_offs):
    """Evaluate one Hamiltonian term coefficient at global time t (us)."""
    t_loc = t - arm_start
    re = row[0]
    im = row[1]
    mag = 1.0
    if row[2] != 0.0:
        mag *= amp_env(t_loc, g_segs)
    env_mu = 0.0
    need_mu = row[3] != 0.0 or row[4] >= 0.0
    if need_mu:
        env_mu = amp_env(t_loc, mu_segs)
    if row[3] != 0.0:
        mag *= env_mu
    if row[4] >= 0.0:
        mag *= bessel_jn(int(row[4]), row[5] * env_mu)
    if mag == 0.0:
        return 0.0 + 0.0j
    if row[6] == 1.0:
        mag *= math.cos(row[7] * t)
    elif row[6] == 2.0:
        mag *= math.sin(row[7] * t)
    if row[8] == 1.0:
        mag *= math.cos(row[9] * t)
    elif row[8] == 2.0:
        mag *= math.sin(row[9] * t)
    c = complex(re * mag, im * mag)
    sign = row[10]
    if sign != 0.0:
        mi = int(row[11])
        ph = sign * (
            phi_mode(t_loc, mode_w0[mi], mode_w1[mi], m_segs, m_offs, phi0s[mi])
            + row[12] * t
            + row[13]
        )
        c *= complex(math.cos(ph), math.sin(ph))
    return c


@maybe_njit
def rhs_packed(t, y, out, mats, rows, arm_start, mode_w0, mode_w1, phi0s,
               g_segs, mu_segs, m_segs, m_offs):
    """out = -i H(t) y, accumulated term by term."""
    d = y.shape[0]
    for i in range(d):
        out[i] = 0.0 + 0.0j
    for k in range(rows.shape[0]):
        c = coef_eval(t, arm_start, rows[k], mode_w0, mode_w1, phi0s,
                      g_segs, mu_segs, m_segs, m_offs)
        if c == 0.0:
            continue
        minus_ic = complex(c.imag, -c.real)
        mk = mats[k]
        for i in range(d):
            acc = 0.0 + 0.0j
            for j in range(d):
                acc += mk[i, j] * y[j]
            out[i] += minus_ic * acc
    return out


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (35.0 / 384.0 - 5179.0 / 57600.0,
                                500.0 / 1113.0 - 7571.0 / 16695.0,
                                125.0 / 192.0 - 393.0 / 640.0,
                                -2187.0 / 6784.0 + 92097.0 / 339200.0,
                                11.0 / 84.0 - 187.0 / 2100.0,
                                -1.0 / 40.0)

RK_OK = 0
RK_MIN_STEP = 1


@maybe_njit
def rk45_packed(y0, t0, t1, rtol, atol, max_step, min_step,
                mats, rows, arm_start, mode_w0, mode_w1, phi0s,
                g_segs, mu_segs, m_segs, m_offs):
    """Adaptive Dormand-Prince propagation of i dy/dt = H(t) y.

    Returns (y, n_accepted, n_rejected, status).
    """
    d = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(d, np.complex128)
    k2 = np.empty(d, np.complex128)
    k3 = np.empty(d, np.complex128)
    k4 = np.empty(d, np.complex128)
    k5 = np.empty(d, np.complex128)
    k6 = np.empty(d, np.complex128)
    k7 = np.empty(d, np.complex128)
    ytmp = np.empty(d, np.complex128)
    ynew = np.empty(d, np.complex128)

    t = t0
    h = max_step
    if h > t1 - t0:
        h = t1 - t0
    n_acc = 0
    n_rej = 0
    rhs_packed(t, y, k1, mats, rows, arm_start, mode_w0, mode_w1, phi0s,
               g_segs, mu_segs, m_segs, m_offs)
    while t < t1:
        if h < min_step:
            return y, n_acc, n_rej, RK_MIN_STEP
        if t + h > t1:
            h = t1 - t
        for i in range(d):
            ytmp[i] = y[i] + h * _A21 * k1[i]
        rhs_packed(t + _C2 * h, ytmp, k2, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        for i in range(d):
            ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        rhs_packed(t + _C3 * h, ytmp, k3, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        for i in range(d):
            ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        rhs_packed(t + _C4 * h, ytmp, k4, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        for i in range(d):
            ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        rhs_packed(t + _C5 * h, ytmp, k5, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        for i in range(d):
            ytmp[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                  + _A64 * k4[i] + _A65 * k5[i])
        rhs_packed(t + h, ytmp, k6, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        for i in range(d):
            ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                  + _B5 * k5[i] + _B6 * k6[i])
        rhs_packed(t + h, ynew, k7, mats, rows, arm_start, mode_w0, mode_w1,
                   phi0s, g_segs, mu_segs, m_segs, m_offs)
        # embedded error estimate
        err = 0.0
        for i in range(d):
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                     + _E6 * k6[i] + _E7 * k7[i])
            ya = abs(y[i])
            yb = abs(ynew[i])
            sc = atol + rtol * (ya if ya > yb else yb)
            q = abs(e) / sc
            err += q * q
        err = math.sqrt(err / d)
        if err <= 1.0:
            t += h
            for i in range(d):
                y[i] = ynew[i]
                k1[i] = k7[i]
            n_acc += 1
        else:
            n_rej += 1
        if err == 0.0:
            fac = 5.0
        else:
            fac = 0.9 * err ** -0.2
            if fac < 0.2:
                fac = 0.2
            elif fac > 5.0:
                fac = 5.0
        h *= fac
        if h > max_step:
            h = max_step
    return y, n_acc, n_rej, RK_OK


def warmup():
    """Trigger JIT compilation of the full kernel stack on tiny inputs."""
    mats = np.zeros((1, 2, 2), np.complex128)
    mats[0] = np.array([[0.0, 1.0], [1.0, 0.0]], np.complex128)
    rows = np.zeros((1, 14))
    rows[0, 0] = 1.0
    rows[0, 4] = -1.0
    rows[0, 11] = 0.0
    segs = np.array([[0.0, 1.0, 1.0, 0.0]])
    m_segs = np.zeros((1, 12))
    m_segs[0, :4] = [0.0, 1.0, 0.0, 1.0]
    m_offs = np.zeros(1)
    w = np.array([1.0])
    y0 = np.array([1.0, 0.0], np.complex128)
    rk45_packed(y0, 0.0, 0.1, 1e-8, 1e-10, 0.05, 1e-12, mats, rows, 0.0,
                w, w, np.zeros(1), segs, segs, m_segs, m_offs)
    bessel_jn(2, 2.405)
