"""Truncated spin (x) Fock Hilbert spaces, operators, states and measurements.

Tensor-factor order is fixed throughout the package: the two-qubit spin
factor comes first, then the motional modes in declaration order.  All
modules build embedded operators through :func:`embed` rather than hand-open
Kronecker products.

Operators and states are immutable after construction and safe to share
across parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TruncationError

HERMITICITY_TOL = 1e-12
NORM_TOL = 1e-9

PAULI = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}

# two-spin basis order: |uu>, |ud>, |du>, |dd>
UP, DOWN = 0, 1


def hermiticity_defect(matrix: np.ndarray) -> float:
    """Largest entry of |M - M^dagger|."""
    return float(np.max(np.abs(matrix - matrix.conj().T)))


@dataclass(frozen=True)
class HilbertSpec:
    """Factor layout of a truncated spin (x) Fock space."""

    n_spins: int = 2
    fock_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_spins < 1:
            raise DimensionError("need at least one spin")
        object.__setattr__(self, "fock_dims", tuple(int(d) for d in self.fock_dims))
        if any(d < 2 for d in self.fock_dims):
            raise DimensionError("every Fock dimension must be >= 2")

    @property
    def spin_dim(self) -> int:
        return 2**self.n_spins

    @property
    def factor_dims(self) -> tuple[int, ...]:
        return (self.spin_dim,) + self.fock_dims

    @property
    def dim(self) -> int:
        return int(np.prod(self.factor_dims))


class Operator:
    """Dense operator on a truncated space.

    ``hermitian=True`` asserts Hermiticity on construction (tolerance 1e-12,
    scaled by the largest entry).
    """

    __slots__ = ("matrix", "dim", "is_hermitian")

    def __init__(self, matrix: np.ndarray, hermitian: bool | None = None):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"operator must be square, got shape {matrix.shape}")
        self.matrix = matrix
        self.dim = matrix.shape[0]
        if hermitian:
            scale = max(float(np.max(np.abs(matrix))), 1.0)
            defect = hermiticity_defect(matrix)
            if defect > HERMITICITY_TOL * scale:
                raise ValueError(f"operator not Hermitian: defect {defect:.3e}")
        self.is_hermitian = bool(hermitian)

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, hermitian=self.is_hermitian)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            return Operator(self.matrix @ other.matrix)
        return self.matrix @ other

    def __add__(self, other):
        return Operator(self.matrix + other.matrix)

    def __sub__(self, other):
        return Operator(self.matrix - other.matrix)

    def __mul__(self, scalar):
        return Operator(self.matrix * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"Operator(dim={self.dim}, hermitian={self.is_hermitian})"


class StateVector:
    """Normalized pure state (2-norm 1 within 1e-9)."""

    __slots__ = ("amplitudes", "dim")

    def __init__(self, amplitudes: np.ndarray, normalize: bool = False):
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        nrm = float(np.linalg.norm(amps))
        if normalize:
            if nrm == 0.0:
                raise ValueError("cannot normalize the zero vector")
            amps = amps / nrm
        elif abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm} deviates from 1 by more than {NORM_TOL}")
        self.amplitudes = amps
        self.dim = amps.shape[0]

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __repr__(self):
        return f"StateVector(dim={self.dim})"


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state, either dense or as a weighted pure-state ensemble.

    The ensemble form is the default for mixed motional states; dense
    matrices are only materialized for small (spin-reduced) objects.
    """

    matrix: np.ndarray | None = None
    ensemble: tuple[tuple[float, StateVector], ...] = field(default=())

    def __post_init__(self):
        if (self.matrix is None) == (len(self.ensemble) == 0):
            raise ValueError("provide exactly one of matrix or ensemble")
        if self.matrix is not None:
            m = np.asarray(self.matrix, dtype=complex)
            object.__setattr__(self, "matrix", m)
            if abs(np.trace(m).real - 1.0) > NORM_TOL or abs(np.trace(m).imag) > NORM_TOL:
                raise ValueError("density matrix trace deviates from 1")
            if hermiticity_defect(m) > 1e-9 * max(1.0, float(np.max(np.abs(m)))):
                raise ValueError("density matrix is not Hermitian")
            rng = np.random.default_rng(7)
            for _ in range(8):  # PSD spot check via random quadratic forms
                v = rng.normal(size=m.shape[0]) + 1j * rng.normal(size=m.shape[0])
                q = np.vdot(v, m @ v).real
                if q < -1e-9 * np.vdot(v, v).real:
                    raise ValueError("density matrix is not positive semidefinite")
        else:
            w = np.array([wk for wk, _ in self.ensemble], dtype=float)
            if np.any(w < -1e-15):
                raise ValueError("ensemble weights must be nonnegative")
            if abs(math.fsum(w) - 1.0) > NORM_TOL:
                raise ValueError("ensemble weights must sum to 1")

    @property
    def dim(self) -> int:
        if self.matrix is not None:
            return self.matrix.shape[0]
        return self.ensemble[0][1].dim

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls(ensemble=((1.0, psi),))

    def to_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for w, psi in self.ensemble:
            out += w * np.outer(psi.amplitudes, psi.amplitudes.conj())
        return out


def ladder(dim: int) -> tuple[Operator, Operator]:
    """Annihilation/creation pair on a dim-level truncated mode.

    a|n> = sqrt(n)|n-1>; the returned creation operator is the exact
    conjugate transpose, so [a, a^dagger] deviates from the identity only in
    the top corner entry (1 - dim).
    """
    if dim < 2:
        raise DimensionError("Fock dimension must be >= 2")
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = math.sqrt(n)
    return Operator(a), Operator(a.conj().T)


def number_operator(dim: int) -> Operator:
    a, adag = ladder(dim)
    return Operator(adag.matrix @ a.matrix, hermitian=True)


def embed(op: Operator, slot: int, spec: HilbertSpec) -> Operator:
    """Embed a factor operator into the full space (identity elsewhere).

    Slot 0 is the spin factor, slots 1..n_modes the Fock factors, matching
    the fixed tensor order spin (x) mode1 (x) mode2 (x) ...
    """
    dims = spec.factor_dims
    if slot < 0 or slot >= len(dims):
        raise DimensionError(f"slot {slot} out of range for {len(dims)} factors")
    if op.dim != dims[slot]:
        raise DimensionError(
            f"operator dim {op.dim} does not match factor dim {dims[slot]} at slot {slot}"
        )
    out = np.array([[1.0 + 0.0j]])
    for k, d in enumerate(dims):
        out = np.kron(out, op.matrix if k == slot else np.eye(d, dtype=complex))
    return Operator(out, hermitian=True if op.is_hermitian else None)


def collective_spin(axis: str, sign: str, spec: HilbertSpec) -> Operator:
    """Two-ion collective spin operator sigma_i (x) I +/- I (x) sigma_i.

    ``sign`` selects the in-phase (+, COM modes) or out-of-phase (-, stretch
    modes) combination; the result is tensored with the identity on every
    Fock factor.
    """
    if spec.n_spins != 2:
        raise DimensionError("collective spin operators are defined for exactly 2 spins")
    if axis not in PAULI:
        raise ValueError(f"axis must be one of x, y, z, got {axis!r}")
    if sign not in ("in_phase", "out_of_phase"):
        raise ValueError("sign must be 'in_phase' or 'out_of_phase'")
    s = 1.0 if sign == "in_phase" else -1.0
    pauli = PAULI[axis]
    eye2 = np.eye(2, dtype=complex)
    spin = np.kron(pauli, eye2) + s * np.kron(eye2, pauli)
    return embed(Operator(spin, hermitian=True), 0, spec)


def coherent_state(dim: int, xi: complex) -> StateVector:
    """Coherent state with amplitude xi, renormalized after truncation.

    Requires |xi|^2 <= dim/4 so the truncated Poisson tail stays negligible.
    """
    nbar = abs(xi) ** 2
    if nbar > dim / 4.0:
        raise TruncationError(
            f"|xi|^2 = {nbar:.3f} exceeds dim/4; need fock dim >= {math.ceil(4 * nbar)}"
        )
    amps = np.zeros(dim, dtype=complex)
    amps[0] = 1.0
    for n in range(1, dim):
        amps[n] = amps[n - 1] * xi / math.sqrt(n)
    amps *= math.exp(-0.5 * nbar)
    return StateVector(amps, normalize=True)


def fock_state(dim: int, n: int) -> StateVector:
    if not 0 <= n < dim:
        raise DimensionError(f"Fock index {n} outside truncated space of dim {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return StateVector(amps)


def poisson_weights(nbar: float, dim: int) -> np.ndarray:
    """Truncated, renormalized Poisson number distribution with mean nbar."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    w = np.zeros(dim)
    w[0] = 1.0
    for n in range(1, dim):
        w[n] = w[n - 1] * nbar / n
    w *= math.exp(-nbar)
    return w / math.fsum(w)


def phase_averaged_coherent(dim: int, xi_abs: float) -> DensityMatrix:
    """Phase-randomized coherent state: diagonal Poisson mixture of Fock states.

    Averaging a coherent state of fixed |xi| over its phase leaves the
    diagonal e^{-nbar} nbar^n / n! |n><n| with nbar = |xi|^2, which is how a
    resonant drive with shot-to-shot random phase prepares the mode.
    """
    nbar = float(xi_abs) ** 2
    if nbar > dim / 4.0:
        raise TruncationError(
            f"nbar = {nbar:.3f} exceeds dim/4; need fock dim >= {math.ceil(4 * nbar)}"
        )
    w = poisson_weights(nbar, dim)
    ensemble = tuple((float(w[n]), fock_state(dim, n)) for n in range(dim) if w[n] > 0.0)
    return DensityMatrix(ensemble=ensemble)


def _spin_density_pure(psi: StateVector, spec: HilbertSpec) -> np.ndarray:
    v = psi.amplitudes.reshape(spec.spin_dim, -1)
    return v @ v.conj().T


def spin_density(state: StateVector | DensityMatrix, spec: HilbertSpec) -> np.ndarray:
    """Reduced spin density matrix (motional factors traced out).

    Ensemble branches are combined entry-wise with exact (fsum) accumulation,
    so the result does not depend on branch order.
    """
    if isinstance(state, StateVector):
        return _spin_density_pure(state, spec)
    if state.matrix is not None:
        d_s = spec.spin_dim
        d_m = state.matrix.shape[0] // d_s
        r = state.matrix.reshape(d_s, d_m, d_s, d_m)
        return np.einsum("imjm->ij", r)
    blocks = [w * _spin_density_pure(psi, spec) for w, psi in state.ensemble]
    d_s = spec.spin_dim
    out = np.empty((d_s, d_s), dtype=complex)
    for i in range(d_s):
        for j in range(d_s):
            out[i, j] = complex(
                math.fsum(b[i, j].real for b in blocks),
                math.fsum(b[i, j].imag for b in blocks),
            )
    return out


def measure_populations(state: StateVector | DensityMatrix, spec: HilbertSpec):
    """Two-spin subspace populations (P_dd, P_mixed, P_uu), motional traced out."""
    rho = spin_density(state, spec)
    if rho.shape != (4, 4):
        raise DimensionError("population measurement requires a two-spin state")
    p_uu = rho[0, 0].real
    p_mixed = rho[1, 1].real + rho[2, 2].real
    p_dd = rho[3, 3].real
    return p_dd, p_mixed, p_uu
