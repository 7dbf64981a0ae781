"""Envelope functions and the full gate pulse schedule.

One arm of the gate consists of, in order: gradient amplitude ramp-on over
tau_g, bichromatic amplitude ramp-on over tau_mu at the far detuning,
motional-frequency ramp from far to near detuning over tau_m, a flat top at
the near detuning, and the time-reversed ramps.  Amplitude ramps use the
rising/falling halves of a 4-term Blackman-Harris window rescaled to span
[0, 1] exactly; the motional ramp holds the normalized rate |dD/dt| / D^2 at
a constant alpha, with quintic endpoint smoothing enforcing dD/dt = 0 at
both ends without ever exceeding alpha.  (alpha here is the magnitude of the
adiabaticity parameter; the ramp moves downward from Delta_0 to Delta_1, so
the core profile is Delta(t) = Delta_0 / (1 + alpha Delta_0 t).)

Public APIs use SI units (seconds, rad/s).  The packed representation used
by the propagation kernels is in microseconds and rad/us.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from . import _kernels
from ._kernels import BH_EDGE
from .errors import ScheduleError

_S_TO_US = 1e6
_RADS_TO_RADUS = 1e-6

SEG_CONST0 = 0
SEG_CONST1 = 1
SEG_BH_RISE = 2
SEG_BH_FALL = 3

MSEG_CONST = 0
MSEG_QUINTIC = 1
MSEG_CORE = 2
MSEG_SIN2_FALL = 3
MSEG_SIN2_RISE = 4


def blackman_harris_ramp(t, tau: float, direction: str):
    """Rescaled half Blackman-Harris ramp, 0 at the off end and 1 at the peak.

    ``direction='on'`` rises over [0, tau]; ``'off'`` is its mirror image,
    off(t) = on(tau - t).  Monotone on the half window.
    """
    if direction not in ("on", "off"):
        raise ValueError("direction must be 'on' or 'off'")
    if tau <= 0:
        raise ValueError("tau must be positive")
    scalar = np.isscalar(t)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < -1e-12 * tau) or np.any(t_arr > tau * (1 + 1e-12)):
        raise ValueError(f"t outside [0, {tau}]")
    s = np.clip(t_arr / tau, 0.0, 1.0)
    if direction == "off":
        s = 1.0 - s
    w = (
        _kernels.BH_A0
        - _kernels.BH_A1 * np.cos(np.pi * s)
        + _kernels.BH_A2 * np.cos(2 * np.pi * s)
        - _kernels.BH_A3 * np.cos(3 * np.pi * s)
    )
    out = (w - BH_EDGE) / (1.0 - BH_EDGE)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class GateParams:
    """Physical gate drive parameters (SI: rad/s and seconds).

    ``modulation_index`` is the fully-ramped-on value of 4*Omega_mu/delta;
    the bichromatic Rabi rate follows from it.  ``epsilon`` is a detuning
    offset applied to delta (as delta + epsilon/2, shifting the near-resonant
    force by epsilon) to model motional-frequency miscalibration.
    """

    omega_0: float = 2 * math.pi * 596e6
    omega_g: float = 2 * math.pi * 5e6
    delta: float = 2 * math.pi * 894e3
    Omega_g: float = 2 * math.pi * 2.5e3
    modulation_index: float = 2.405
    Delta_0: float = 2 * math.pi * 153.5e3
    Delta_1: float = 2 * math.pi * 15e3
    alpha: float = 0.2
    tau_g: float = 10e-6
    tau_mu: float = 30e-6
    flat_top: float | None = 347e-6
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.Delta_0 > self.Delta_1 > 0):
            raise ValueError("need Delta_0 > Delta_1 > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.tau_g < 0 or self.tau_mu < 0:
            raise ValueError("ramp durations must be >= 0")
        if self.flat_top is not None and self.flat_top < 0:
            raise ValueError("flat_top must be >= 0")
        if self.modulation_index < 0:
            raise ValueError("modulation_index must be >= 0")

    @property
    def Omega_mu(self) -> float:
        return self.modulation_index * self.delta / 4.0

    @property
    def delta_eff(self) -> float:
        return self.delta + 0.5 * self.epsilon

    @property
    def sdf_frequency(self) -> float:
        """Frequency of the near-resonant state-dependent force, omega_g + 2 delta_eff."""
        return self.omega_g + 2.0 * self.delta_eff

    @property
    def omega_m0(self) -> float:
        """Near-detuned (unramped) motional frequency, fixed by Delta_1 at epsilon=0."""
        return self.omega_g + 2.0 * self.delta + self.Delta_1

    def with_flat_top(self, flat_top: float) -> "GateParams":
        return replace(self, flat_top=flat_top)


@dataclass(frozen=True)
class RampSegment:
    """One closed-form piece of the normalized ramp envelope e(t) in [0, 1].

    Core segments store ``coeffs = (a, dc)`` describing the hyperbola
    Delta(t) = dc / (1 - a dc (t - t0)); a = -alpha on the downward ramp and
    +alpha on its time-reversed copy.
    """

    t0: float
    t1: float
    kind: int
    coeffs: tuple[float, ...] = ()

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


def _poly_eval(coeffs, s):
    v = 0.0
    for c in reversed(coeffs):
        v = v * s + c
    return v


def _poly_eval_deriv(coeffs, s):
    v = 0.0
    for k in range(len(coeffs) - 1, 0, -1):
        v = v * s + k * coeffs[k]
    return v


def _seg_envelope(seg: RampSegment, t: float, Delta_1: float, depth: float) -> float:
    if seg.kind == MSEG_CONST:
        return seg.coeffs[0]
    if seg.kind == MSEG_CORE:
        a, dc = seg.coeffs
        return (dc / (1.0 - a * dc * (t - seg.t0)) - Delta_1) / depth
    s = (t - seg.t0) / seg.duration
    s = min(max(s, 0.0), 1.0)
    if seg.kind == MSEG_QUINTIC:
        return _poly_eval(seg.coeffs, s)
    if seg.kind == MSEG_SIN2_FALL:
        return math.cos(0.5 * math.pi * s) ** 2
    return math.sin(0.5 * math.pi * s) ** 2


def _seg_envelope_deriv(seg: RampSegment, t: float, Delta_1: float, depth: float) -> float:
    if seg.kind == MSEG_CONST:
        return 0.0
    if seg.kind == MSEG_CORE:
        a, dc = seg.coeffs
        d = dc / (1.0 - a * dc * (t - seg.t0))
        return a * d * d / depth
    s = (t - seg.t0) / seg.duration
    s = min(max(s, 0.0), 1.0)
    if seg.kind == MSEG_QUINTIC:
        return _poly_eval_deriv(seg.coeffs, s) / seg.duration
    sgn = -1.0 if seg.kind == MSEG_SIN2_FALL else 1.0
    return sgn * 0.5 * math.pi * math.sin(math.pi * s) / seg.duration


def _seg_envelope_integral(seg: RampSegment, t: float, Delta_1: float, depth: float) -> float:
    """Integral of the segment envelope from seg.t0 to t (closed form)."""
    dt = t - seg.t0
    if seg.kind == MSEG_CONST:
        return seg.coeffs[0] * dt
    if seg.kind == MSEG_CORE:
        a, dc = seg.coeffs
        kap = a * dc
        return ((-dc / kap) * math.log1p(-kap * dt) - Delta_1 * dt) / depth
    length = seg.duration
    s = min(max(dt / length, 0.0), 1.0)
    if seg.kind == MSEG_QUINTIC:
        v = 0.0
        n = len(seg.coeffs)
        for k in range(n - 1, -1, -1):
            v = v * s + seg.coeffs[k] / (k + 1.0)
        return v * s * length
    if seg.kind == MSEG_SIN2_FALL:
        return length * (0.5 * s + math.sin(math.pi * s) / (2.0 * math.pi))
    return length * (0.5 * s - math.sin(math.pi * s) / (2.0 * math.pi))


@dataclass(frozen=True)
class DetuningRamp:
    """Far-to-near detuning ramp profile with endpoint smoothing.

    ``segments`` describe the normalized envelope e(t) (1 at Delta_0, 0 at
    Delta_1) over [0, tau_m_total]; the detuning is
    Delta(t) = Delta_1 + (Delta_0 - Delta_1) e(t).
    """

    Delta_0: float
    Delta_1: float
    alpha: float
    tau_m_base: float
    tau_m_total: float
    segments: tuple[RampSegment, ...]
    knots: tuple[tuple[float, float], ...] = field(repr=False, default=())

    @property
    def depth(self) -> float:
        return self.Delta_0 - self.Delta_1

    def _locate(self, t: float) -> RampSegment:
        for seg in self.segments:
            if t <= seg.t1:
                return seg
        return self.segments[-1]

    def envelope(self, t: float) -> float:
        t = min(max(t, 0.0), self.tau_m_total)
        return _seg_envelope(self._locate(t), t, self.Delta_1, self.depth)

    def detuning(self, t: float) -> float:
        return self.Delta_1 + self.depth * self.envelope(t)

    def adiabaticity(self, t: float) -> float:
        t = min(max(t, 0.0), self.tau_m_total)
        seg = self._locate(t)
        d = self.Delta_1 + self.depth * _seg_envelope(seg, t, self.Delta_1, self.depth)
        slope = self.depth * _seg_envelope_deriv(seg, t, self.Delta_1, self.depth)
        return abs(slope) / (d * d)

    def max_adiabaticity(self, n_grid: int = 10_000) -> float:
        ts = np.linspace(0.0, self.tau_m_total, n_grid)
        return max(self.adiabaticity(t) for t in ts)


def _solve_quintic(v0, d0, c0, v1, d1, c1, h):
    """Quintic on s in [0, 1] with value/slope/curvature (v0, d0, c0) at s=0
    and (v1, d1, c1) at s=1, slopes and curvatures in physical time units."""
    coeffs = np.zeros(6)
    coeffs[0] = v0
    coeffs[1] = d0 * h
    coeffs[2] = 0.5 * c0 * h * h
    rhs = np.array(
        [
            v1 - (coeffs[0] + coeffs[1] + coeffs[2]),
            d1 * h - (coeffs[1] + 2 * coeffs[2]),
            c1 * h * h - 2 * coeffs[2],
        ]
    )
    m = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    coeffs[3:] = np.linalg.solve(m, rhs)
    coeffs[5] += v1 - coeffs.sum()  # pin the endpoint value exactly
    return coeffs


def adiabatic_ramp(
    Delta_0: float,
    Delta_1: float,
    alpha: float,
    junction_fraction: float = 0.1,
    n_grid: int = 10_000,
) -> DetuningRamp:
    """Constant-adiabaticity detuning ramp with smoothed endpoints.

    The base profile Delta(t) = Delta_0 / (1 + alpha Delta_0 t) reaches
    Delta_1 after tau_m_base = (Delta_0 - Delta_1)/(alpha Delta_0 Delta_1).
    The first and last ``junction_fraction`` of the base ramp are replaced by
    quintic segments that match value, slope and curvature at the junctions
    and have zero slope and curvature at the endpoints; each smoothing
    segment is lengthened in 5% steps until |dD/dt|/D^2 <= alpha holds on a
    dense grid, so tau_m_total >= tau_m_base.
    """
    if not (Delta_0 > Delta_1 > 0):
        raise ValueError("need Delta_0 > Delta_1 > 0")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    depth = Delta_0 - Delta_1
    tau_b = depth / (alpha * Delta_0 * Delta_1)

    def core(u):
        return Delta_0 / (1.0 + alpha * Delta_0 * u)

    u1 = junction_fraction * tau_b
    u2 = (1.0 - junction_fraction) * tau_b
    d_u1, d_u2 = core(u1), core(u2)
    slope_u1 = -alpha * d_u1 * d_u1
    slope_u2 = -alpha * d_u2 * d_u2
    curv_u1 = 2.0 * alpha * alpha * d_u1**3
    curv_u2 = 2.0 * alpha * alpha * d_u2**3
    bound = alpha * (1.0 + 1e-9)

    def fit_segment(h, va, da, ca, vb, db, cb):
        coeffs = _solve_quintic(va, da, ca, vb, db, cb, h)
        s = np.linspace(0.0, 1.0, 2048)
        p = np.polynomial.polynomial.polyval(s, coeffs)
        dp = np.polynomial.polynomial.polyval(
            s, np.polynomial.polynomial.polyder(coeffs)) / h
        ok = bool(np.all(p > 0) and np.all(np.abs(dp) <= bound * p * p))
        return coeffs, ok

    h = u1
    for _ in range(400):
        head, ok = fit_segment(h, Delta_0, 0.0, 0.0, d_u1, slope_u1, curv_u1)
        if ok:
            break
        h *= 1.05
    else:
        raise ScheduleError("could not smooth ramp head within the adiabaticity bound")
    g = u1
    for _ in range(400):
        tail, ok = fit_segment(g, d_u2, slope_u2, curv_u2, Delta_1, 0.0, 0.0)
        if ok:
            break
        g *= 1.05
    else:
        raise ScheduleError("could not smooth ramp tail within the adiabaticity bound")

    tau_total = h + (u2 - u1) + g
    head_env = tuple((c - (Delta_1 if k == 0 else 0.0)) / depth for k, c in enumerate(head))
    tail_env = tuple((c - (Delta_1 if k == 0 else 0.0)) / depth for k, c in enumerate(tail))
    segments = (
        RampSegment(0.0, h, MSEG_QUINTIC, head_env),
        RampSegment(h, h + (u2 - u1), MSEG_CORE, (-alpha, d_u1)),
        RampSegment(h + (u2 - u1), tau_total, MSEG_QUINTIC, tail_env),
    )
    ramp = DetuningRamp(Delta_0, Delta_1, alpha, tau_b, tau_total, segments)
    worst = ramp.max_adiabaticity(n_grid)
    if worst > alpha * (1.0 + 1e-6):
        raise ScheduleError(f"smoothed ramp violates adiabaticity: {worst} > {alpha}")
    knots = tuple(
        (float(t), float(ramp.detuning(t))) for t in np.linspace(0.0, tau_total, 33)
    )
    return replace(ramp, knots=knots)


def sine_squared_ramp(Delta_0: float, Delta_1: float, tau: float) -> DetuningRamp:
    """Half-cosine-squared ramp matching the closed-form displacement model.

    ``alpha`` on the result reports the profile's worst-case adiabaticity.
    """
    if not (Delta_0 > Delta_1 > 0):
        raise ValueError("need Delta_0 > Delta_1 > 0")
    if tau <= 0:
        raise ValueError("tau must be positive")
    segments = (RampSegment(0.0, tau, MSEG_SIN2_FALL, ()),)
    ramp = DetuningRamp(Delta_0, Delta_1, float("inf"), tau, tau, segments)
    alpha_eff = ramp.max_adiabaticity(4096)
    knots = tuple((float(t), float(ramp.detuning(t))) for t in np.linspace(0.0, tau, 33))
    return DetuningRamp(Delta_0, Delta_1, alpha_eff, tau, tau, segments, knots)


@dataclass(frozen=True)
class PackedSchedule:
    """Kernel-ready arrays, in microseconds and rad/us."""

    g_segs: np.ndarray
    mu_segs: np.ndarray
    m_segs: np.ndarray
    m_offs: np.ndarray
    t_f: float  # us


@dataclass(frozen=True)
class PulseSchedule:
    """One arm of the gate pulse sequence (SI units).

    The accumulated motional phase phi(t) and the detuning phase
    int_0^t Delta dt' are evaluated from per-segment closed-form
    antiderivatives cached at build time; downstream code never re-integrates
    the mode frequency.
    """

    params: GateParams
    ramp: DetuningRamp | None
    t_f: float
    boundaries: tuple[float, ...]
    profile: str

    # -- normalized envelopes -------------------------------------------------
    def _amp_env(self, t, t_on, t_off, tau):
        scalar = np.isscalar(t)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t_arr)
        if tau == 0.0:
            out[(t_arr >= t_on) & (t_arr <= t_off)] = 1.0
        else:
            rising = (t_arr >= t_on) & (t_arr < t_on + tau)
            flat = (t_arr >= t_on + tau) & (t_arr <= t_off - tau)
            falling = (t_arr > t_off - tau) & (t_arr <= t_off)
            out[rising] = blackman_harris_ramp(t_arr[rising] - t_on, tau, "on")
            out[flat] = 1.0
            out[falling] = blackman_harris_ramp(t_arr[falling] - (t_off - tau), tau, "off")
        return float(out[0]) if scalar else out

    def gradient_envelope(self, t):
        return self._amp_env(t, 0.0, self.t_f, self.params.tau_g)

    def bichromatic_envelope(self, t):
        return self._amp_env(
            t, self.params.tau_g, self.t_f - self.params.tau_g, self.params.tau_mu
        )

    @cached_property
    def _mseg_table(self):
        """Motional envelope segments over the full arm, with integral offsets."""
        segs: list[RampSegment] = []
        if self.ramp is None:
            segs.append(RampSegment(0.0, self.t_f, MSEG_CONST, (0.0,)))
        else:
            b = self.boundaries
            t2, t3, t4, t5 = b[2], b[3], b[4], b[5]
            if t2 > 0:
                segs.append(RampSegment(0.0, t2, MSEG_CONST, (1.0,)))
            for seg in self.ramp.segments:
                segs.append(replace(seg, t0=seg.t0 + t2, t1=seg.t1 + t2))
            if t4 > t3:
                segs.append(RampSegment(t3, t4, MSEG_CONST, (0.0,)))
            for seg in reversed(self.ramp.segments):
                segs.append(self._mirror(seg, t4))
            if self.t_f > t5:
                segs.append(RampSegment(t5, self.t_f, MSEG_CONST, (1.0,)))
        d1 = self.params.Delta_1
        depth = 0.0 if self.ramp is None else self.ramp.depth
        offs = [0.0]
        for seg in segs:
            offs.append(offs[-1] + _seg_envelope_integral(seg, seg.t1, d1, depth))
        return tuple(segs), tuple(offs[:-1])

    def _mirror(self, seg: RampSegment, t4: float) -> RampSegment:
        """Time-reversed copy of a down-ramp segment, anchored after the flat top."""
        tau_r = self.ramp.tau_m_total
        t0 = t4 + (tau_r - seg.t1)
        t1 = t4 + (tau_r - seg.t0)
        if seg.kind == MSEG_QUINTIC:
            c = seg.coeffs
            n = len(c)
            flipped = [0.0] * n
            for k in range(n):
                flipped[k] = sum(c[j] * math.comb(j, k) for j in range(k, n)) * (-1.0) ** k
            return RampSegment(t0, t1, MSEG_QUINTIC, tuple(flipped))
        if seg.kind == MSEG_CORE:
            a, dc = seg.coeffs
            d_end = dc / (1.0 - a * dc * seg.duration)
            return RampSegment(t0, t1, MSEG_CORE, (-a, d_end))
        if seg.kind == MSEG_SIN2_FALL:
            return RampSegment(t0, t1, MSEG_SIN2_RISE, ())
        raise ScheduleError(f"cannot mirror segment kind {seg.kind}")

    def motional_envelope(self, t):
        segs, _ = self._mseg_table
        d1 = self.params.Delta_1
        depth = 0.0 if self.ramp is None else self.ramp.depth
        scalar = np.isscalar(t)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        for i, ti in enumerate(t_arr):
            ti = min(max(ti, 0.0), self.t_f)
            seg = segs[-1]
            for s in segs:
                if ti <= s.t1:
                    seg = s
                    break
            out[i] = _seg_envelope(seg, ti, d1, depth)
        return float(out[0]) if scalar else out

    # -- physical waveforms ---------------------------------------------------
    def amp_gradient(self, t):
        """Gradient Rabi amplitude Omega_g(t), rad/s."""
        return self.params.Omega_g * self.gradient_envelope(t)

    def amp_bichromatic(self, t):
        """Bichromatic Rabi amplitude Omega_mu(t), rad/s."""
        return self.params.Omega_mu * self.bichromatic_envelope(t)

    def mode_frequency(self, t):
        """Gate-mode frequency omega_m(t), rad/s."""
        depth = 0.0 if self.ramp is None else self.ramp.depth
        return self.params.omega_m0 + depth * self.motional_envelope(t)

    def detuning(self, t):
        """Instantaneous SDF detuning Delta(t) = omega_m(t) - omega_g - 2 delta_eff."""
        return self.mode_frequency(t) - self.params.sdf_frequency

    def sdf_rate(self, t):
        """Effective gate coupling Omega_phi(t) = Omega_g(t) J2(4 Omega_mu(t)/delta_eff)."""
        idx = 4.0 * np.asarray(self.amp_bichromatic(t)) / self.params.delta_eff
        j2 = np.vectorize(lambda x: _kernels.bessel_jn(2, x))(idx)
        out = self.amp_gradient(t) * j2
        return float(out) if np.isscalar(t) else out

    # -- accumulated phases ---------------------------------------------------
    def envelope_integral(self, t):
        """E(t) = int_0^t e_m(t') dt' in seconds."""
        segs, offs = self._mseg_table
        d1 = self.params.Delta_1
        depth = 0.0 if self.ramp is None else self.ramp.depth
        scalar = np.isscalar(t)
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t_arr)
        for i, ti in enumerate(t_arr):
            ti_c = min(max(ti, 0.0), self.t_f)
            val = None
            for seg, off in zip(segs, offs):
                if ti_c <= seg.t1:
                    val = off + _seg_envelope_integral(seg, ti_c, d1, depth)
                    break
            if val is None:
                val = offs[-1] + _seg_envelope_integral(segs[-1], segs[-1].t1, d1, depth)
            if ti > self.t_f:
                val += _seg_envelope(segs[-1], self.t_f, d1, depth) * (ti - self.t_f)
            out[i] = val
        return float(out[0]) if scalar else out

    def phase(self, t):
        """Accumulated motional phase phi(t) = int_0^t omega_m dt', rad."""
        depth = 0.0 if self.ramp is None else self.ramp.depth
        return self.params.omega_m0 * np.asarray(t, dtype=float) + depth * self.envelope_integral(t)

    def detuning_phase(self, t):
        """int_0^t Delta(t') dt' (rad), evaluated without large cancellations."""
        depth = 0.0 if self.ramp is None else self.ramp.depth
        base = self.params.Delta_1 - self.params.epsilon
        return base * np.asarray(t, dtype=float) + depth * self.envelope_integral(t)

    # -- kernel packing -------------------------------------------------------
    @cached_property
    def packed(self) -> PackedSchedule:
        p = self.params

        def amp_rows(t_on, t_off, tau):
            rows = []
            if t_on > 0:
                rows.append([0.0, t_on, SEG_CONST0, 0.0])
            if tau > 0:
                rows.append([t_on, t_on + tau, SEG_BH_RISE, 0.0])
                rows.append([t_on + tau, t_off - tau, SEG_CONST1, 0.0])
                rows.append([t_off - tau, t_off, SEG_BH_FALL, 0.0])
            else:
                rows.append([t_on, t_off, SEG_CONST1, 0.0])
            if t_off < self.t_f:
                rows.append([t_off, self.t_f, SEG_CONST0, 0.0])
            rows = [r for r in rows if r[1] > r[0]]
            arr = np.array(rows, dtype=float)
            arr[:, :2] *= _S_TO_US
            return arr

        g_segs = amp_rows(0.0, self.t_f, p.tau_g)
        mu_segs = amp_rows(p.tau_g, self.t_f - p.tau_g, p.tau_mu)

        segs, _ = self._mseg_table
        d1 = p.Delta_1
        depth = 0.0 if self.ramp is None else self.ramp.depth
        m_rows = []
        for seg in segs:
            row = np.zeros(12)
            row[0] = seg.t0 * _S_TO_US
            row[1] = seg.t1 * _S_TO_US
            row[2] = seg.kind
            if seg.kind == MSEG_CONST:
                row[3] = seg.coeffs[0]
            elif seg.kind == MSEG_QUINTIC:
                row[3 : 3 + len(seg.coeffs)] = seg.coeffs
            elif seg.kind == MSEG_CORE:
                a, dc = seg.coeffs
                row[3] = a * dc * _RADS_TO_RADUS  # kap, 1/us
                row[4] = dc * _RADS_TO_RADUS
                row[5] = d1 * _RADS_TO_RADUS
                row[6] = 1.0 / (depth * _RADS_TO_RADUS)
            m_rows.append(row)
        m_segs = np.array(m_rows)
        m_offs = np.zeros(len(m_rows))
        acc = 0.0
        for i, seg in enumerate(segs):
            m_offs[i] = acc
            acc += _seg_envelope_integral(seg, seg.t1, d1, depth) * _S_TO_US
        return PackedSchedule(g_segs, mu_segs, m_segs, m_offs, self.t_f * _S_TO_US)


def build_schedule(params: GateParams, ramp: DetuningRamp | None) -> PulseSchedule:
    """Assemble one arm from the amplitude ramps, detuning ramp and flat top.

    The arm duration is t_f = 2 (tau_g + tau_mu + tau_m_total) + flat_top;
    the bichromatic field only turns on after the gradient is fully ramped,
    and the motional ramp starts only after both amplitude ramps.
    """
    if params.flat_top is None:
        raise ScheduleError("flat_top is not set; calibrate it or supply a value")
    tau_m = 0.0 if ramp is None else ramp.tau_m_total
    t1 = params.tau_g
    t2 = t1 + params.tau_mu
    t3 = t2 + tau_m
    t4 = t3 + params.flat_top
    t5 = t4 + tau_m
    t6 = t5 + params.tau_mu
    t7 = t6 + params.tau_g
    if t7 <= 0:
        raise ScheduleError("schedule has zero duration")
    if ramp is not None:
        if not math.isclose(ramp.Delta_0, params.Delta_0, rel_tol=1e-12):
            raise ScheduleError("ramp Delta_0 does not match gate parameters")
        if not math.isclose(ramp.Delta_1, params.Delta_1, rel_tol=1e-12):
            raise ScheduleError("ramp Delta_1 does not match gate parameters")
    profile = "constant" if ramp is None else (
        "sine_squared" if ramp.segments[0].kind == MSEG_SIN2_FALL else "adiabatic_spline"
    )
    return PulseSchedule(
        params=params,
        ramp=ramp,
        t_f=t7,
        boundaries=(0.0, t1, t2, t3, t4, t5, t6, t7),
        profile=profile,
    )


@dataclass(frozen=True)
class AdiabaticityReport:
    max_adiabaticity: float
    spectral_guard: float


def verify_adiabaticity(schedule: PulseSchedule, n_grid: int = 10_000) -> AdiabaticityReport:
    """Largest |dDelta/dt| / Delta^2 over the arm, plus a spectral diagnostic.

    The spectral guard is the relative Fourier content of the gradient
    turn-on envelope at the (time-averaged) mode frequency; it quantifies
    off-resonant motional excitation by the amplitude ramp and is reported,
    not enforced.
    """
    if schedule.ramp is None:
        worst = 0.0
    else:
        worst = schedule.ramp.max_adiabaticity(n_grid)

    p = schedule.params
    depth = 0.0 if schedule.ramp is None else schedule.ramp.depth
    omega_bar = p.omega_m0 + 0.5 * depth
    tau = p.tau_g
    if tau == 0.0:
        guard = 1.0
    else:
        re = quad(lambda t: blackman_harris_ramp(t, tau, "on") * math.cos(omega_bar * t),
                  0.0, tau, limit=800)[0]
        im = quad(lambda t: blackman_harris_ramp(t, tau, "on") * math.sin(omega_bar * t),
                  0.0, tau, limit=800)[0]
        dc = quad(lambda t: blackman_harris_ramp(t, tau, "on"), 0.0, tau, limit=200)[0]
        guard = math.hypot(re, im) / dc
    return AdiabaticityReport(max_adiabaticity=float(worst), spectral_guard=float(guard))


def export_schedule_csv(schedule: PulseSchedule, path, n_samples: int = 2001, header_lines=()):
    """Write t_s, Omega_g_rad_s, Omega_mu_rad_s, omega_m_rad_s, phi_rad samples."""
    ts = np.linspace(0.0, schedule.t_f, n_samples)
    og = schedule.amp_gradient(ts)
    om = schedule.amp_bichromatic(ts)
    wm = schedule.mode_frequency(ts)
    ph = schedule.phase(ts)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["t_s", "Omega_g_rad_s", "Omega_mu_rad_s", "omega_m_rad_s", "phi_rad"])
        for row in zip(ts, og, om, wm, ph):
            writer.writerow([f"{v:.12e}" for v in row])
