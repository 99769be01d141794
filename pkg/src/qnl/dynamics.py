"""Qubit states, drive Hamiltonians, and Lindblad propagation.

The drive Hamiltonian follows the rotating-wave form

    H = -Omega_R * V(t) * [[0, e^{i(dw*t - phi)}], [e^{-i(dw*t - phi)}, 0]]

which at zero detuning reduces to -Omega_R * V(t) * (cos(phi) sx + sin(phi) sy),
so phi selects the rotation axis.  Propagation happens in the frame rotating at
the pulse carrier: the detuning dw appears there as a -dw|1><1| precession term
(for three levels additionally (alpha - 2*dw)|2><2| with anharmonicity alpha),
and populations are identical in either frame.

Decoherence enters as the Lindblad equation

    drho/dt = -i[H, rho] + G1 D[s-]rho + (Gphi/2) D[sz]rho

with G1 = 1/T1 and Gphi = 1/T_phi, 1/T_phi = 1/T2 - 1/(2*T1).  Each envelope
sample is propagated by the exact matrix exponential of the full Lindblad
superoperator, so steps are exact for piecewise-constant H and there is no
stiffness tuning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidInputError, UnphysicalCoherenceError

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# Typical transmon anharmonicity, used only when a three-level model is
# requested and no value is configured.  Invented default; flagged in docs.
DEFAULT_ANHARMONICITY = -2.0 * np.pi * 300e6  # rad/s

_TRACE_TOL = 1e-9
_HERM_TOL = 1e-12
_EIG_TOL = -1e-9


def dephasing_time(t1: float, t2: float) -> float:
    """Pure-dephasing time T_phi from T1 and T2.

    1/T_phi = 1/T2 - 1/(2*T1).  Returns math.inf when T2 = 2*T1 (no pure
    dephasing).  Raises UnphysicalCoherenceError when T2 > 2*T1.
    """
    if not (t1 > 0.0 and t2 > 0.0):
        raise InvalidInputError(f"coherence times must be positive, got t1={t1}, t2={t2}")
    rate = 1.0 / t2 - 1.0 / (2.0 * t1)
    tol = 1e-12 * (1.0 / t2)
    if rate < -tol:
        raise UnphysicalCoherenceError(f"t2={t2} exceeds 2*t1={2 * t1}")
    if rate <= tol:
        return math.inf
    return 1.0 / rate


@dataclass(frozen=True)
class DriveParams:
    """Drive-field parameters: Rabi rate Omega_R, detuning dw, phase phi.

    All angular frequencies in rad/s, phase in radians (stored modulo 2*pi).
    """

    rabi_rate: float
    detuning: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not (self.rabi_rate >= 0.0):
            raise InvalidInputError(f"rabi_rate must be >= 0, got {self.rabi_rate}")
        object.__setattr__(self, "phase", float(self.phase) % (2.0 * np.pi))


@dataclass(frozen=True)
class CoherenceParams:
    """T1/T2 pair with the derived pure-dephasing time.

    t_phi is recomputed on construction; t2 > 2*t1 is rejected as unphysical.
    """

    t1: float
    t2: float
    t_phi: float = None  # derived, do not pass

    def __post_init__(self):
        object.__setattr__(self, "t_phi", dephasing_time(self.t1, self.t2))

    @property
    def gamma1(self) -> float:
        return 1.0 / self.t1

    @property
    def gamma_phi(self) -> float:
        return 0.0 if math.isinf(self.t_phi) else 1.0 / self.t_phi


class DensityMatrix:
    """d x d complex density matrix, d = 2 or 3, validated on construction."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
            raise InvalidInputError(f"density matrix must be 2x2 or 3x3, got shape {m.shape}")
        if abs(np.trace(m).real - 1.0) > _TRACE_TOL or abs(np.trace(m).imag) > _TRACE_TOL:
            raise InvalidInputError(f"trace must be 1 within {_TRACE_TOL}, got {np.trace(m)}")
        if not np.allclose(m, m.conj().T, atol=_HERM_TOL, rtol=0.0):
            raise InvalidInputError("density matrix must be Hermitian within 1e-12")
        if np.linalg.eigvalsh(m).min() < _EIG_TOL:
            raise InvalidInputError("density matrix must be positive semidefinite")
        m = m.copy()
        m.setflags(write=False)
        self.matrix = m

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def ground(cls, dim: int = 2) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return cls(m)

    @classmethod
    def excited(cls, dim: int = 2) -> "DensityMatrix":
        m = np.zeros((dim, dim), dtype=complex)
        m[1, 1] = 1.0
        return cls(m)

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix":
        v = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise InvalidInputError("state vector must be nonzero")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def plus_state(cls) -> "DensityMatrix":
        return cls.pure([1.0, 1.0])

    def population(self, level: int) -> float:
        return float(self.matrix[level, level].real)

    @property
    def populations(self) -> np.ndarray:
        return np.diag(self.matrix).real.copy()

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def to_debug_json(self) -> str:
        return operator_to_debug_json(self.matrix)

    @classmethod
    def from_debug_json(cls, text: str) -> "DensityMatrix":
        return cls(operator_from_debug_json(text))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, populations={self.populations.tolist()})"


@dataclass(frozen=True)
class Propagation:
    """Time-ordered result of a piecewise-constant propagation."""

    dt: float
    times: np.ndarray
    states: tuple

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise InvalidInputError("times and states must have equal length")
        if len(self.times) > 1:
            spacing = np.diff(self.times)
            if not (spacing > 0).all() or not np.allclose(spacing, self.dt, rtol=1e-9, atol=0.0):
                raise InvalidInputError("times must increase uniformly by dt")

    @property
    def final(self) -> DensityMatrix:
        return self.states[-1]


def operator_to_debug_json(op: np.ndarray) -> str:
    """Serialize a complex matrix as a JSON debug dump (row-major [re, im] pairs)."""
    m = np.asarray(op, dtype=complex)
    pairs = [[float(z.real), float(z.imag)] for z in m.ravel(order="C")]
    return json.dumps({"dim": m.shape[0], "elements": pairs})


def operator_from_debug_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    d = int(doc["dim"])
    flat = np.array([complex(re, im) for re, im in doc["elements"]], dtype=complex)
    return flat.reshape(d, d)


def drive_hamiltonian(params: DriveParams, envelope_value: float, t: float = 0.0) -> np.ndarray:
    """Drive Hamiltonian for one envelope sample, in the qubit frame.

    Returns the 2x2 Hermitian operator with (0,1) element
    -Omega_R * V * exp(i*(dw*t - phi)); at dw=0 this is
    -Omega_R * V * (cos(phi) sx + sin(phi) sy).
    """
    v = float(envelope_value)
    if not math.isfinite(v):
        raise InvalidInputError(f"envelope value must be finite, got {envelope_value}")
    upper = -params.rabi_rate * v * np.exp(1j * (params.detuning * t - params.phase))
    return np.array([[0.0, upper], [np.conj(upper), 0.0]], dtype=complex)


def lowering_operator(dim: int = 2) -> np.ndarray:
    """|0><1| relaxation jump operator, embedded in dim levels."""
    op = np.zeros((dim, dim), dtype=complex)
    op[0, 1] = 1.0
    return op


def dephasing_operator(dim: int = 2) -> np.ndarray:
    """sigma_z on the 0-1 subspace, embedded in dim levels."""
    op = np.zeros((dim, dim), dtype=complex)
    op[0, 0] = 1.0
    op[1, 1] = -1.0
    return op


def _dissipator_superop(coherence, dim: int, decay21_rate=None) -> np.ndarray:
    """Constant dissipative part of the Lindblad superoperator (row-major vec)."""
    d2 = dim * dim
    out = np.zeros((d2, d2), dtype=complex)
    if coherence is None:
        return out
    jumps = [(coherence.gamma1, lowering_operator(dim)),
             (coherence.gamma_phi / 2.0, dephasing_operator(dim))]
    if dim == 3:
        rate21 = coherence.gamma1 if decay21_rate is None else float(decay21_rate)
        op21 = np.zeros((dim, dim), dtype=complex)
        op21[1, 2] = 1.0
        jumps.append((rate21, op21))
    eye = np.eye(dim)
    for rate, op in jumps:
        if rate == 0.0:
            continue
        opd_op = op.conj().T @ op
        out += rate * (np.kron(op, op.conj())
                       - 0.5 * (np.kron(opd_op, eye) + np.kron(eye, opd_op.T)))
    return out


def _hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    dim = h.shape[-1]
    eye = np.eye(dim)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def liouvillian(h: np.ndarray, coherence=None, decay21_rate=None) -> np.ndarray:
    """Full Lindblad superoperator for constant H (row-major vec convention)."""
    return _hamiltonian_superop(h) + _dissipator_superop(coherence, h.shape[0], decay21_rate)


def lindblad_step(rho: DensityMatrix, h: np.ndarray, coherence: CoherenceParams,
                  dt: float) -> DensityMatrix:
    """One exact step of the Lindblad equation under constant H."""
    h = np.asarray(h, dtype=complex)
    if not (dt > 0.0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if h.shape != (rho.dim, rho.dim):
        raise InvalidInputError(f"operator shape {h.shape} does not match state dim {rho.dim}")
    scale = max(np.abs(h).max(), 1.0)
    if not np.allclose(h, h.conj().T, atol=1e-10 * scale, rtol=0.0):
        raise InvalidInputError("Hamiltonian must be Hermitian")
    prop = expm(liouvillian(h, coherence) * dt)
    out = (prop @ rho.matrix.ravel()).reshape(rho.dim, rho.dim)
    return DensityMatrix(0.5 * (out + out.conj().T))


def _batched_hamiltonians(amplitudes: np.ndarray, rabi_scale: float, detuning: float,
                          dim: int, anharmonicity: float) -> np.ndarray:
    """Carrier-frame Hamiltonians for a batch of complex drive amplitudes."""
    n = amplitudes.shape[0]
    h = np.zeros((n, dim, dim), dtype=complex)
    coupling = -rabi_scale * np.conj(amplitudes)
    h[:, 0, 1] = coupling
    h[:, 1, 0] = np.conj(coupling)
    h[:, 1, 1] = -detuning
    if dim == 3:
        h[:, 1, 2] = math.sqrt(2.0) * coupling
        h[:, 2, 1] = np.conj(h[:, 1, 2])
        h[:, 2, 2] = anharmonicity - 2.0 * detuning
    return h


def step_propagators(amplitudes, sample_period: float, rabi_scale: float,
                     detuning: float = 0.0, coherence: CoherenceParams | None = None,
                     dim: int = 2, anharmonicity: float = DEFAULT_ANHARMONICITY,
                     decay21_rate: float | None = None) -> np.ndarray:
    """Exact per-sample propagators, shape (n, dim^2, dim^2), acting on vec(rho).

    amplitudes are complex drive values in envelope units (noise already
    applied by the caller); each sample is held constant for sample_period.
    """
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.ndim != 1:
        raise InvalidInputError("amplitudes must be a 1-d array")
    if not (sample_period > 0.0):
        raise InvalidInputError(f"sample period must be positive, got {sample_period}")
    h = _batched_hamiltonians(amps, rabi_scale, detuning, dim, anharmonicity)
    eye = np.eye(dim)
    ham_part = np.einsum("nij,kl->nikjl", h, eye).reshape(-1, dim * dim, dim * dim)
    ham_part -= np.einsum("ij,nkl->nikjl", eye, np.transpose(h, (0, 2, 1))).reshape(
        -1, dim * dim, dim * dim)
    louvi = -1j * ham_part
    louvi += _dissipator_superop(coherence, dim, decay21_rate)
    return expm(louvi * sample_period)


def ordered_product(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product mats[n-1] @ ... @ mats[0] by pairwise reduction."""
    arr = np.asarray(mats)
    if arr.ndim == 2:
        return arr
    if arr.shape[0] == 0:
        raise InvalidInputError("cannot reduce an empty propagator stack")
    while arr.shape[0] > 1:
        n = arr.shape[0]
        even = n - (n % 2)
        paired = arr[1:even:2] @ arr[0:even:2]
        arr = np.concatenate([paired, arr[even:]], axis=0) if n % 2 else paired
    return arr[0]


def evolve(rho0: DensityMatrix, schedule, coherence: CoherenceParams | None = None,
           noise=None, keep_trajectory: bool = True,
           anharmonicity: float = DEFAULT_ANHARMONICITY,
           decay21_rate: float | None = None) -> Propagation:
    """Propagate rho0 through a PulseSchedule, optionally with additive noise.

    Noise couples in the pulse frame: the in-phase stream adds to the envelope
    amplitude V(t) and the quadrature stream drives the orthogonal axis, i.e.
    a_k = (V_k + nI_k + i*nQ_k) * e^{i*phi_k}.  A zero-length schedule returns
    the input state unchanged.
    """
    samples = np.asarray(schedule.samples, dtype=complex)
    n = samples.shape[0]
    dt = schedule.sample_period
    if n == 0:
        return Propagation(dt=dt, times=np.array([0.0]), states=(rho0,))
    if noise is not None:
        n_i = np.asarray(noise.in_phase, dtype=float)
        n_q = np.asarray(noise.quadrature, dtype=float)
        if n_i.shape[0] != n or n_q.shape[0] != n:
            raise InvalidInputError(
                f"noise length {n_i.shape[0]} does not match schedule length {n}")
        amps = samples + (n_i + 1j * n_q) * np.exp(1j * schedule.phase_per_sample())
    else:
        amps = samples
    props = step_propagators(amps, dt, schedule.rabi_scale, schedule.detuning,
                             coherence, rho0.dim, anharmonicity, decay21_rate)
    if not keep_trajectory:
        total = ordered_product(props)
        out = (total @ rho0.matrix.ravel()).reshape(rho0.dim, rho0.dim)
        final = DensityMatrix(0.5 * (out + out.conj().T))
        return Propagation(dt=n * dt, times=np.array([0.0, n * dt]), states=(rho0, final))
    states = [rho0]
    vec = rho0.matrix.ravel().astype(complex)
    for k in range(n):
        vec = props[k] @ vec
        m = vec.reshape(rho0.dim, rho0.dim)
        m = 0.5 * (m + m.conj().T)
        states.append(DensityMatrix(m))
        vec = m.ravel()
    times = np.arange(n + 1) * dt
    return Propagation(dt=dt, times=times, states=tuple(states))
