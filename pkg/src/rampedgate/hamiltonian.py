"""Time-dependent gate Hamiltonians and the SDF modulation spectrum.

Three levels of description are provided:

* :func:`ion_frame_hamiltonian` - bichromatic qubit drive plus oscillating
  state-dependent force, one term pair per motional mode;
* :func:`bichromatic_frame_hamiltonian` - the same dynamics in the frame of
  the qubit drive, where the force splits into Bessel-weighted modulation
  sidebands at multiples of the bichromatic detuning;
* :func:`gate_hamiltonian_truncated` - only the near-resonant second
  sideband, either with its carrier factors ("carrier") or after the
  rotating-wave reduction used by the analytic displacement model
  ("rotating").

Coefficient callables on the returned objects take the global time in
microseconds and return rad/us (see the propagator's unit conventions); all
builder inputs are SI.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, ScheduleError
from .quantum import HilbertSpec, Operator, collective_spin, embed, hermiticity_defect, ladder
from .ramps import PulseSchedule

_S_TO_US = 1e6
_RADS_TO_RADUS = 1e-6


@dataclass(frozen=True)
class ModeSpec:
    """One motional mode: frequency, ramp depth, coupling and spin symmetry.

    ``omega_m1`` is the ramp depth (the mode sits at omega_m0 + omega_m1 at
    the far-detuned point and at omega_m0 when fully ramped); modes that do
    not follow the trap ramp use omega_m1 = 0.  ``spin_sign`` selects the
    in-phase or out-of-phase collective spin operator the mode couples to.
    """

    label: str
    omega_m0: float
    omega_m1: float
    Omega_g: float
    spin_sign: str = "in_phase"
    fock_dim: int = 8

    def __post_init__(self):
        if self.omega_m0 <= 0:
            raise ValueError("omega_m0 must be positive")
        if self.fock_dim < 2:
            raise DimensionError("fock_dim must be >= 2")
        if self.spin_sign not in ("in_phase", "out_of_phase"):
            raise ValueError("spin_sign must be 'in_phase' or 'out_of_phase'")


def gate_mode(params, ramp, fock_dim: int = 48, label: str = "gate") -> ModeSpec:
    """ModeSpec for the gate mode implied by the schedule parameters."""
    depth = 0.0 if ramp is None else ramp.depth
    return ModeSpec(
        label=label,
        omega_m0=params.omega_m0,
        omega_m1=depth,
        Omega_g=params.Omega_g,
        spin_sign="in_phase",
        fock_dim=fock_dim,
    )


@dataclass(frozen=True)
class HamiltonianTerm:
    coef: object  # Callable[[float], complex], t in us -> rad/us
    op: Operator
    row: np.ndarray | None = None


@dataclass(frozen=True)
class TimeDependentHamiltonian:
    """Sum of (scalar coefficient function, constant operator) terms.

    Immutable and shareable.  ``fastest_frequency`` (rad/us) bounds the
    oscillation rate of every coefficient and drives the integrator's
    maximum step.  ``meta`` carries builder tags (e.g. the displacement rate
    of an S_z-force Hamiltonian for the branch fast path).
    """

    terms: tuple[HamiltonianTerm, ...]
    dim: int
    t0_us: float
    t1_us: float
    fastest_frequency: float
    packed_context: tuple | None = None
    meta: dict = field(default_factory=dict)

    def matrix(self, t_us: float) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for term in self.terms:
            c = term.coef(t_us)
            if c != 0.0:
                h += c * term.op.matrix
        return h

    def hermiticity_defect(self, t_us: float) -> float:
        return hermiticity_defect(self.matrix(t_us))

    def packed_arrays(self):
        if self.packed_context is None:
            return None
        return self.packed_context


def _check_hermitian(ham: TimeDependentHamiltonian, samples=(0.3, 0.5, 0.8)):
    span = ham.t1_us - ham.t0_us
    for frac in samples:
        t = ham.t0_us + frac * span
        m = ham.matrix(t)
        scale = max(float(np.max(np.abs(m))), 1e-30)
        if hermiticity_defect(m) > 1e-12 * scale:
            raise ValueError("built Hamiltonian is not Hermitian")


def _mode_operators(modes, spec: HilbertSpec):
    """Per-mode (S_spin @ a, S_spin @ a^dagger) products on the full space."""
    if len(modes) != len(spec.fock_dims):
        raise DimensionError("mode count does not match the Hilbert spec")
    ops = []
    for i, mode in enumerate(modes):
        if mode.fock_dim != spec.fock_dims[i]:
            raise DimensionError(f"mode {mode.label}: fock_dim mismatch at slot {i + 1}")
        a, adag = ladder(mode.fock_dim)
        a_full = embed(a, i + 1, spec)
        adag_full = embed(adag, i + 1, spec)
        ops.append((a_full, adag_full))
    return ops


def _coef_from_row(row, pack, arm_start_us, mode_w0, mode_w1, phi0s):
    def coef(t_us: float) -> complex:
        return _kernels.coef_eval(
            t_us, arm_start_us, row, mode_w0, mode_w1, phi0s,
            pack.g_segs, pack.mu_segs, pack.m_segs, pack.m_offs,
        )

    return coef


class _TermBuilder:
    """Accumulates coefficient rows against a packed schedule."""

    def __init__(self, schedule: PulseSchedule, modes, arm_start: float, phi_offsets):
        self.pack = schedule.packed
        self.arm_start_us = arm_start * _S_TO_US
        self.mode_w0 = np.array([m.omega_m0 * _RADS_TO_RADUS for m in modes])
        self.mode_w1 = np.array([m.omega_m1 * _RADS_TO_RADUS for m in modes])
        if phi_offsets is None:
            phi_offsets = np.zeros(len(modes))
        self.phi0s = np.asarray(phi_offsets, dtype=float)
        if self.phi0s.shape != (len(modes),):
            raise DimensionError("phi_offsets must have one entry per mode")
        self.terms: list[HamiltonianTerm] = []
        self.mats: list[np.ndarray] = []

    def add(self, op: Operator, amp: complex, *, use_g=0, use_mu=0, bessel_n=-1,
            index_peak=0.0, trig1=(0, 0.0), trig2=(0, 0.0), phase_sign=0,
            mode_idx=0, lin_w=0.0, phase0=0.0):
        row = np.zeros(14)
        row[0], row[1] = amp.real, amp.imag
        row[2], row[3] = use_g, use_mu
        row[4], row[5] = bessel_n, index_peak
        row[6], row[7] = trig1[0], trig1[1]
        row[8], row[9] = trig2[0], trig2[1]
        row[10], row[11] = phase_sign, mode_idx
        row[12], row[13] = lin_w, phase0
        coef = _coef_from_row(row, self.pack, self.arm_start_us,
                              self.mode_w0, self.mode_w1, self.phi0s)
        self.terms.append(HamiltonianTerm(coef=coef, op=op, row=row))
        self.mats.append(np.ascontiguousarray(op.matrix))

    def build(self, dim, t_f_us, fastest, meta=None) -> TimeDependentHamiltonian:
        rows = np.array([t.row for t in self.terms])
        mats = np.array(self.mats)
        ctx = (mats, rows, self.arm_start_us, self.mode_w0, self.mode_w1, self.phi0s,
               self.pack.g_segs, self.pack.mu_segs, self.pack.m_segs, self.pack.m_offs)
        ham = TimeDependentHamiltonian(
            terms=tuple(self.terms),
            dim=dim,
            t0_us=self.arm_start_us,
            t1_us=self.arm_start_us + t_f_us,
            fastest_frequency=fastest,
            packed_context=ctx,
            meta=meta or {},
        )
        _check_hermitian(ham)
        return ham


def ion_frame_hamiltonian(
    schedule: PulseSchedule,
    modes: list[ModeSpec],
    spec: HilbertSpec,
    arm_start: float = 0.0,
    phi_offsets=None,
) -> TimeDependentHamiltonian:
    """Qubit-drive plus state-dependent-force Hamiltonian in the ion frame.

    H(t) = 2 Omega_mu(t) S_x cos(delta_eff t)
         + sum_i 2 Omega_g,i(t) cos(omega_g t) S_z,i (a_i e^{-i phi_i} + h.c.)

    The detuning offset epsilon enters through delta_eff = delta + epsilon/2.
    """
    if schedule.packed is None:
        raise ScheduleError("schedule has no cached phase data")
    p = schedule.params
    tb = _TermBuilder(schedule, modes, arm_start, phi_offsets)
    sx = collective_spin("x", "in_phase", spec)
    tb.add(sx, 2.0 * p.Omega_mu * _RADS_TO_RADUS, use_mu=1,
           trig1=(1, p.delta_eff * _RADS_TO_RADUS))
    fastest = p.delta_eff
    for i, (mode, (a_full, adag_full)) in enumerate(zip(modes, _mode_operators(modes, spec))):
        sz = collective_spin("z", mode.spin_sign, spec)
        amp = 2.0 * mode.Omega_g * _RADS_TO_RADUS
        wg = p.omega_g * _RADS_TO_RADUS
        tb.add(Operator(sz.matrix @ a_full.matrix), amp, use_g=1,
               trig1=(1, wg), phase_sign=-1, mode_idx=i)
        tb.add(Operator(sz.matrix @ adag_full.matrix), amp, use_g=1,
               trig1=(1, wg), phase_sign=+1, mode_idx=i)
        fastest = max(fastest, p.omega_g + mode.omega_m0 + max(mode.omega_m1, 0.0))
    return tb.build(spec.dim, schedule.t_f * _S_TO_US, fastest * _RADS_TO_RADUS,
                    meta={"level": "ion_frame"})


def bichromatic_frame_hamiltonian(
    schedule: PulseSchedule,
    modes: list[ModeSpec],
    spec: HilbertSpec,
    n_max: int = 5,
    arm_start: float = 0.0,
    phi_offsets=None,
) -> TimeDependentHamiltonian:
    """Jacobi-Anger expanded state-dependent force in the qubit-drive frame.

    Sidebands up to order ``n_max`` are kept: even orders m couple through
    S_z with weight 2 J_m(4 Omega_mu(t)/delta) cos(m delta t), odd orders
    through S_y with sin(m delta t); the m = 0 carrier keeps weight J_0.
    Valid when the drive is ramped slowly compared to 1/delta; a warning is
    emitted when delta * tau_mu < 50.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    p = schedule.params
    if p.delta_eff * p.tau_mu < 50.0:
        warnings.warn(
            f"bichromatic frame assumes delta*tau_mu >> 1; got {p.delta_eff * p.tau_mu:.1f}",
            stacklevel=2,
        )
    tb = _TermBuilder(schedule, modes, arm_start, phi_offsets)
    index_peak = 4.0 * p.Omega_mu / p.delta_eff
    wg = p.omega_g * _RADS_TO_RADUS
    wd = p.delta_eff * _RADS_TO_RADUS
    fastest = 0.0
    for i, (mode, (a_full, adag_full)) in enumerate(zip(modes, _mode_operators(modes, spec))):
        sz = collective_spin("z", mode.spin_sign, spec)
        sy = collective_spin("y", mode.spin_sign, spec)
        amp_base = 2.0 * mode.Omega_g * _RADS_TO_RADUS
        for m in range(0, n_max + 1):
            if m == 0:
                weight = amp_base
                spin = sz
                trig2 = (0, 0.0)
            else:
                weight = 2.0 * amp_base
                spin = sz if m % 2 == 0 else sy
                trig2 = ((1 if m % 2 == 0 else 2), m * wd)
            for sign, mop in ((-1, a_full), (+1, adag_full)):
                tb.add(Operator(spin.matrix @ mop.matrix), weight, use_g=1,
                       bessel_n=m, index_peak=index_peak,
                       trig1=(1, wg), trig2=trig2, phase_sign=sign, mode_idx=i)
        fastest = max(fastest, p.omega_g + n_max * p.delta_eff
                      + mode.omega_m0 + max(mode.omega_m1, 0.0))
    return tb.build(spec.dim, schedule.t_f * _S_TO_US, fastest * _RADS_TO_RADUS,
                    meta={"level": "bichromatic", "n_max": n_max})


def gate_hamiltonian_truncated(
    schedule: PulseSchedule,
    mode: ModeSpec,
    spec: HilbertSpec,
    form: str = "carrier",
    arm_start: float = 0.0,
    phi_offset: float = 0.0,
) -> TimeDependentHamiltonian:
    """Near-resonant second-sideband gate Hamiltonian for a single mode.

    ``form='carrier'`` keeps the oscillating prefactor:

        H = 4 Omega_g(t) J2(4 Omega_mu(t)/delta) cos(omega_g t) cos(2 delta t)
            * S_z (a e^{-i phi(t)} + a^dagger e^{i phi(t)});

    ``form='rotating'`` applies the rotating-wave reduction used by the
    displacement model,

        H = Omega_phi(t) S_z (a^dagger e^{i dphi(t)} + a e^{-i dphi(t)}),

    with Omega_phi = Omega_g J2(4 Omega_mu/delta) and
    dphi(t) = phi(t) - (omega_g + 2 delta_eff) t, whose rate of change is the
    instantaneous detuning Delta(t).
    """
    if len(spec.fock_dims) != 1:
        raise DimensionError("truncated gate Hamiltonian is single-mode")
    if form not in ("carrier", "rotating"):
        raise ValueError("form must be 'carrier' or 'rotating'")
    p = schedule.params
    tb = _TermBuilder(schedule, [mode], arm_start, [phi_offset])
    sz = collective_spin("z", mode.spin_sign, spec)
    (a_full, adag_full) = _mode_operators([mode], spec)[0]
    index_peak = 4.0 * p.Omega_mu / p.delta_eff
    if form == "carrier":
        amp = 4.0 * mode.Omega_g * _RADS_TO_RADUS
        wg = p.omega_g * _RADS_TO_RADUS
        w2d = 2.0 * p.delta_eff * _RADS_TO_RADUS
        tb.add(Operator(sz.matrix @ a_full.matrix), amp, use_g=1, bessel_n=2,
               index_peak=index_peak, trig1=(1, wg), trig2=(1, w2d),
               phase_sign=-1, mode_idx=0)
        tb.add(Operator(sz.matrix @ adag_full.matrix), amp, use_g=1, bessel_n=2,
               index_peak=index_peak, trig1=(1, wg), trig2=(1, w2d),
               phase_sign=+1, mode_idx=0)
        fastest = p.omega_g + 2.0 * p.delta_eff + mode.omega_m0 + max(mode.omega_m1, 0.0)
    else:
        amp = mode.Omega_g * _RADS_TO_RADUS
        lin_w = -(p.omega_g + 2.0 * p.delta_eff) * _RADS_TO_RADUS
        tb.add(Operator(sz.matrix @ adag_full.matrix), amp, use_g=1, bessel_n=2,
               index_peak=index_peak, phase_sign=+1, mode_idx=0, lin_w=lin_w)
        tb.add(Operator(sz.matrix @ a_full.matrix), amp, use_g=1, bessel_n=2,
               index_peak=index_peak, phase_sign=-1, mode_idx=0, lin_w=lin_w)
        fastest = abs(p.Delta_1) + (mode.omega_m1 if mode.omega_m1 > 0 else 0.0) + abs(p.epsilon)
    # displacement rate = coefficient of the S_z a^dagger term
    adag_index = 1 if form == "carrier" else 0
    meta = {
        "level": f"truncated_{form}",
        "spin_axis": "z",
        "xi_rate_index": adag_index,
        "spin_sign": mode.spin_sign,
    }
    return tb.build(spec.dim, schedule.t_f * _S_TO_US, fastest * _RADS_TO_RADUS, meta=meta)


@dataclass(frozen=True)
class SDFLine:
    """One modulation sideband of the state-dependent force."""

    m: int
    frequency_offset: float  # rad/s relative to omega_g, signed
    weight: float
    spin_axis: str

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("sideband index is non-negative")
        expected = "z" if self.m % 2 == 0 else "y"
        if self.spin_axis != expected:
            raise ValueError(f"sideband {self.m} must carry S_{expected}")


def sdf_spectrum(modulation_index: float, delta: float, n_max: int = 5) -> list[SDFLine]:
    """Frequencies and relative strengths of the SDF modulation sidebands.

    Returns 2*n_max + 1 lines at offsets 0, +/-delta, ..., +/-n_max*delta
    with weights J_m(modulation_index); even sidebands act through S_z, odd
    ones through S_y.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    lines = []
    for m in range(0, n_max + 1):
        weight = _kernels.bessel_jn(m, modulation_index)
        axis = "z" if m % 2 == 0 else "y"
        if m == 0:
            lines.append(SDFLine(0, 0.0, weight, axis))
        else:
            lines.append(SDFLine(m, +m * delta, weight, axis))
            lines.append(SDFLine(m, -m * delta, weight, axis))
    lines.sort(key=lambda l: l.frequency_offset)
    return lines


def export_spectrum_csv(lines, path, header_lines=()):
    """Write m, offset_hz, weight, axis rows."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["m", "offset_hz", "weight", "axis"])
        for ln in lines:
            writer.writerow(
                [ln.m, f"{ln.frequency_offset / (2 * math.pi):.9e}", f"{ln.weight:.12e}", ln.spin_axis]
            )
