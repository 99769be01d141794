"""Single-qubit Clifford group with virtual-Z-optimal pulse decompositions.

Conventions
-----------
A resonant drive segment with envelope area theta and carrier phase phi
implements R(phi, theta) = exp(+i (theta/2) sigma_phi), where sigma_phi =
cos(phi) sigma_x + sin(phi) sigma_y (sign fixed by the drive Hamiltonian
H(0,1) = -Omega_R V e^{-i phi}).  Z rotations are virtual: Rz(c) =
exp(-i (c/2) sigma_z) is never played; it advances the frame so that a later
op requested at logical phase phi is played at physical phase phi - frame.

Every Clifford element is written in the normal form Rz(c) . R(phi, theta)
with c, phi on the quarter-turn grid and theta in {pi/2, pi} (or no pulse at
all for the four pure-Z elements).  Phases are stored as integer quarter
turns so frame arithmetic is exact.  An area-pi op is realized as two
back-to-back half-pi envelopes at the same phase, which keeps a single
calibrated envelope and composes exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import InvalidInputError
from .pulses import PulseSchedule, make_envelope

_QUARTER = math.pi / 2.0
GROUP_ORDER = 24


def _rz(quarters: int) -> np.ndarray:
    half = quarters * _QUARTER / 2.0
    return np.array([[np.exp(-1j * half), 0.0], [0.0, np.exp(1j * half)]])


def _pulse_unitary(phase_quarters: int, area_quarters: int) -> np.ndarray:
    theta = area_quarters * _QUARTER
    phi = phase_quarters * _QUARTER
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, 1j * s * np.exp(-1j * phi)],
                     [1j * s * np.exp(1j * phi), c]])


def _canonical(mat: np.ndarray) -> np.ndarray:
    """Representative of mat modulo global phase: first big entry real positive."""
    flat = mat.ravel()
    pivot = flat[np.argmax(np.abs(flat) > 0.5)]
    return mat * (pivot.conjugate() / abs(pivot))


def _key(mat: np.ndarray):
    canon = _canonical(mat)
    return tuple((round(z.real, 9) + 0.0, round(z.imag, 9) + 0.0) for z in canon.ravel())


@dataclass(frozen=True)
class PulseOp:
    """One physical drive op: quarter-turn phase, area in quarter turns (1 or 2)."""

    phase_quarters: int
    area_quarters: int

    def __post_init__(self):
        if self.phase_quarters not in (0, 1, 2, 3):
            raise InvalidInputError(f"phase must be 0..3 quarter turns, got {self.phase_quarters}")
        if self.area_quarters not in (1, 2):
            raise InvalidInputError(f"area must be 1 or 2 quarter turns, got {self.area_quarters}")

    @property
    def phase(self) -> float:
        return self.phase_quarters * _QUARTER

    @property
    def area(self) -> float:
        return self.area_quarters * _QUARTER


@dataclass(frozen=True)
class CliffordElement:
    """Group element with its pulse decomposition and virtual-Z tail."""

    index: int
    matrix: np.ndarray
    pulse_ops: tuple
    virtual_z_quarters: int

    @property
    def n_pulses(self) -> int:
        return len(self.pulse_ops)

    @property
    def duration_units(self) -> int:
        """Gate time in half-pi envelope units (a pi op counts two)."""
        return sum(op.area_quarters for op in self.pulse_ops)

    @property
    def virtual_z(self) -> float:
        return self.virtual_z_quarters * _QUARTER


_CACHE = {}


def _build_group():
    generators = [_pulse_unitary(0, 1), _rz(1)]
    mats = [np.eye(2, dtype=complex)]
    seen = {_key(mats[0])}
    cursor = 0
    while cursor < len(mats):
        base = mats[cursor]
        cursor += 1
        for gen in generators:
            new = _canonical(gen @ base)
            k = _key(new)
            if k not in seen:
                seen.add(k)
                mats.append(new)
    assert len(mats) == GROUP_ORDER, f"group enumeration found {len(mats)} elements"
    return mats


def _decompose(mat: np.ndarray):
    """Cheapest (virtual_z_quarters, pulse_ops) realizing mat, or raise."""
    target = _key(mat)
    best_key, best = None, None
    for c in range(4):
        if _key(_rz(c)) == target:
            key = (0, c, -1)
            if best_key is None or key < best_key:
                best_key, best = key, (c, ())
    for theta, c, phi in product((1, 2), range(4), range(4)):
        if _key(_rz(c) @ _pulse_unitary(phi, theta)) == target:
            key = (theta, c, phi)
            if best_key is None or key < best_key:
                best_key, best = key, (c, (PulseOp(phase_quarters=phi, area_quarters=theta),))
    assert best is not None, "element admits no single-pulse normal form"
    return best


def _tables():
    if "elements" not in _CACHE:
        mats = _build_group()
        elements = []
        key_to_index = {}
        for i, mat in enumerate(mats):
            vz, ops = _decompose(mat)
            mat.setflags(write=False)
            elements.append(CliffordElement(index=i, matrix=mat, pulse_ops=ops,
                                            virtual_z_quarters=vz))
            key_to_index[_key(mat)] = i
        compose = np.empty((GROUP_ORDER, GROUP_ORDER), dtype=np.intp)
        inverse = np.empty(GROUP_ORDER, dtype=np.intp)
        for a, b in product(range(GROUP_ORDER), repeat=2):
            compose[a, b] = key_to_index[_key(mats[a] @ mats[b])]
        for a in range(GROUP_ORDER):
            inverse[a] = key_to_index[_key(mats[a].conj().T)]
        compose.setflags(write=False)
        inverse.setflags(write=False)
        _CACHE.update(elements=tuple(elements), key_to_index=key_to_index,
                      compose=compose, inverse=inverse)
    return _CACHE


def clifford_table() -> tuple:
    """The 24 Clifford elements; element 0 is the identity."""
    return _tables()["elements"]


def find_index(mat: np.ndarray) -> int:
    """Index of the element equal to mat up to global phase."""
    idx = _tables()["key_to_index"].get(_key(np.asarray(mat, dtype=complex)))
    if idx is None:
        raise InvalidInputError("matrix is not a Clifford element")
    return idx


def compose_index(after: int, before: int) -> int:
    """Index of C_after . C_before (before acts first in time)."""
    return int(_tables()["compose"][after, before])


def inverse_index(index: int) -> int:
    return int(_tables()["inverse"][index])


@dataclass(frozen=True)
class RBSequence:
    """Benchmarking sequence bundle: per length, random Cliffords plus recovery."""

    seed: int
    lengths: tuple
    gate_indices: tuple
    recovery_indices: tuple

    def __post_init__(self):
        if not (len(self.lengths) == len(self.gate_indices) == len(self.recovery_indices)):
            raise InvalidInputError("bundle fields must have one entry per length")
        for m, idx in zip(self.lengths, self.gate_indices):
            if len(idx) != m:
                raise InvalidInputError(f"index list length {len(idx)} does not match m={m}")

    def all_indices(self, which: int = 0) -> tuple:
        """Gate indices of one entry, recovery included, in time order."""
        return tuple(self.gate_indices[which]) + (self.recovery_indices[which],)

    def n_envelopes(self, which: int = 0) -> int:
        table = clifford_table()
        return sum(table[i].duration_units for i in self.all_indices(which))


def _draw_indices(m: int, rng: np.random.Generator):
    indices = tuple(int(i) for i in rng.integers(0, GROUP_ORDER, size=m))
    accumulated = 0
    for idx in indices:
        accumulated = compose_index(idx, accumulated)
    return indices, inverse_index(accumulated)


def random_sequence(m: int, seed: int) -> RBSequence:
    """Uniform random length-m Clifford sequence with exact group recovery."""
    if m < 1:
        raise InvalidInputError(f"sequence length must be >= 1, got {m}")
    indices, recovery = _draw_indices(m, np.random.default_rng(int(seed)))
    return RBSequence(seed=int(seed), lengths=(m,), gate_indices=(indices,),
                      recovery_indices=(recovery,))


def sequence_unitary(sequence: RBSequence, which: int = 0) -> np.ndarray:
    """Ideal product including recovery; equals identity up to phase."""
    table = clifford_table()
    mat = np.eye(2, dtype=complex)
    for idx in sequence.all_indices(which):
        mat = table[idx].matrix @ mat
    return mat


@dataclass(frozen=True)
class PulseSettings:
    """Physical realization of one half-pi envelope."""

    shape: str = "gaussian"
    duration: float = 20e-9
    sample_period: float = 0.5e-9
    detuning: float = 0.0

    def base_envelope(self) -> PulseSchedule:
        return make_envelope(self.shape, self.duration, math.pi / 2.0,
                             self.sample_period, detuning=self.detuning)


def compiled_phase_quarters(sequence: RBSequence, which: int = 0) -> list:
    """Physical phase (quarter turns) of each emitted half-pi envelope, in order.

    Frame rule: play at op phase minus accumulated frame, then advance the
    frame by the element's virtual Z.  The frame left over at the end is
    dropped, since measurement is in the Z basis.
    """
    table = clifford_table()
    frame = 0
    out = []
    for idx in sequence.all_indices(which):
        element = table[idx]
        for op in element.pulse_ops:
            physical = (op.phase_quarters - frame) % 4
            out.extend([physical] * op.area_quarters)
        frame = (frame + element.virtual_z_quarters) % 4
    return out


def compile_sequence(sequence: RBSequence, pulses: PulseSettings,
                     which: int = 0) -> PulseSchedule:
    """Flatten a Clifford sequence into one schedule of phased half-pi envelopes."""
    base = pulses.base_envelope()
    quarters = compiled_phase_quarters(sequence, which)
    n_seg = len(quarters)
    n_half = base.n_samples
    if n_seg == 0:
        return PulseSchedule(samples=np.zeros(0, dtype=complex),
                             sample_period=pulses.sample_period,
                             rabi_scale=base.rabi_scale, detuning=pulses.detuning)
    magnitude = np.abs(base.samples)
    phases = np.array([q * _QUARTER for q in quarters])
    samples = (magnitude[None, :] * np.exp(1j * phases)[:, None]).ravel()
    bounds = np.arange(n_seg + 1) * n_half
    return PulseSchedule(samples=samples, sample_period=pulses.sample_period,
                         rabi_scale=base.rabi_scale, detuning=pulses.detuning,
                         segment_phases=phases, segment_bounds=bounds)
