"""Dense statevector simulation for small qubit registers.

Qubit ordering is little-endian: qubit ``k`` is bit ``k`` of the basis
index, so ``|10>`` written as (qubit1, qubit0) is index 2.

The array-level helpers (``apply_rotation``, ``apply_cnot``, ...) accept
amplitude arrays of shape ``(2**q, ...)``: basis index first, then any
batch dimensions, with rotation angles broadcasting against the batch
dimensions. One call advances many independent circuits, and keeping the
batch axes innermost keeps the amplitude-pair updates contiguous. :class:`QuantumState` and :func:`apply_gate`
are the single-circuit surface built on top of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .exceptions import ConfigError

MAX_QUBITS = 8
ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)


@dataclass(frozen=True)
class Gate:
    kind: str
    target: int
    control: Optional[int] = None
    angle: float = 0.0

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ConfigError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT":
            if self.control is None:
                raise ConfigError("CNOT requires a control qubit")
            if self.control == self.target:
                raise ConfigError("CNOT control and target must differ")
        elif self.control is not None:
            raise ConfigError(f"{self.kind} takes no control qubit")


@dataclass
class QuantumState:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_num_qubits(self.num_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.num_qubits,):
            raise ConfigError(
                f"expected {2**self.num_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.probabilities))


def _check_num_qubits(q):
    if not isinstance(q, (int, np.integer)) or not 1 <= q <= MAX_QUBITS:
        raise ConfigError(f"number of qubits must be an integer in [1, {MAX_QUBITS}], got {q!r}")


def _check_qubit(index, q, role="target"):
    if not isinstance(index, (int, np.integer)) or not 0 <= index < q:
        raise ConfigError(f"{role} qubit {index!r} out of range for {q} qubits")


def init_zero_state(q: int) -> QuantumState:
    """Return ``|0...0>`` on ``q`` qubits."""
    _check_num_qubits(q)
    amps = np.zeros(2**q, dtype=complex)
    amps[0] = 1.0
    return QuantumState(q, amps)


def zero_amplitudes(q: int, batch_shape=()) -> np.ndarray:
    amps = np.zeros((2**q,) + tuple(batch_shape), dtype=complex)
    amps[0] = 1.0
    return amps


def _pair_views(amps, q, k):
    # Splits the basis axis so the axis of size 2 is bit k.
    view = amps.reshape((2 ** (q - k - 1), 2, 2**k) + amps.shape[1:])
    return view[:, 0], view[:, 1]


def _out_like(amps, q, batch_shape):
    return np.empty((2**q,) + np.broadcast_shapes(amps.shape[1:], batch_shape), dtype=complex)


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """2x2 unitary for a rotation, with batch dimensions leading."""
    half = 0.5 * np.asarray(angle, dtype=float)
    c, s = np.cos(half), np.sin(half)
    out = np.empty(half.shape + (2, 2), dtype=complex)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-1j * half)
        out[..., 0, 1] = 0.0
        out[..., 1, 0] = 0.0
        out[..., 1, 1] = np.exp(1j * half)
    else:
        raise ConfigError(f"{kind!r} is not a rotation")
    return out


def apply_matrix_1q(amps: np.ndarray, q: int, k: int, matrix: np.ndarray) -> np.ndarray:
    """Apply a (possibly batched) 2x2 matrix to qubit ``k``; returns a new array."""
    a0, a1 = _pair_views(amps, q, k)
    out = _out_like(amps, q, matrix.shape[:-2])
    o0, o1 = _pair_views(out, q, k)
    o0[...] = matrix[..., 0, 0] * a0 + matrix[..., 0, 1] * a1
    o1[...] = matrix[..., 1, 0] * a0 + matrix[..., 1, 1] * a1
    return out


def apply_rotation(amps, q, kind, k, angle, adjoint=False):
    """Apply ``kind(angle)`` to qubit ``k``. ``adjoint`` applies the inverse.

    Specialised per rotation so the coefficients stay real (RY) or
    diagonal (RZ); equivalent to ``apply_matrix_1q`` with
    :func:`rotation_matrix`.
    """
    half = 0.5 * np.asarray(angle, dtype=float)
    if adjoint:
        half = -half
    a0, a1 = _pair_views(amps, q, k)
    out = _out_like(amps, q, half.shape)
    o0, o1 = _pair_views(out, q, k)
    if kind == "RY":
        c, s = np.cos(half), np.sin(half)
        np.multiply(a0, c, out=o0)
        o0 -= a1 * s
        np.multiply(a1, c, out=o1)
        o1 += a0 * s
    elif kind == "RZ":
        phase = np.exp(-1j * half)
        np.multiply(a0, phase, out=o0)
        np.multiply(a1, phase.conj(), out=o1)
    elif kind == "RX":
        c, s = np.cos(half), -1j * np.sin(half)
        o0[...] = c * a0 + s * a1
        o1[...] = s * a0 + c * a1
    else:
        raise ConfigError(f"{kind!r} is not a rotation")
    return out


@lru_cache(maxsize=None)
def _cnot_permutation(q, control, target):
    idx = np.arange(2**q)
    return idx ^ (((idx >> control) & 1) << target)


def apply_cnot(amps: np.ndarray, q: int, control: int, target: int) -> np.ndarray:
    """CNOT is its own inverse, so no adjoint flag is needed."""
    return amps[_cnot_permutation(q, control, target)]


# generator G of R(theta) = exp(-i theta G / 2)
GENERATOR = {"RX": "X", "RY": "Y", "RZ": "Z"}


def apply_pauli(amps, q, pauli, k):
    a0, a1 = _pair_views(amps, q, k)
    out = np.empty_like(amps)
    o0, o1 = _pair_views(out, q, k)
    if pauli == "X":
        o0[...], o1[...] = a1, a0
    elif pauli == "Y":
        o0[...], o1[...] = -1j * a1, 1j * a0
    elif pauli == "Z":
        o0[...], o1[...] = a0, -a1
    else:
        raise ConfigError(f"unknown Pauli {pauli!r}")
    return out


@lru_cache(maxsize=None)
def z_sign_matrix(q: int) -> np.ndarray:
    """``(2**q, q)`` matrix of +1/-1: entry (b, k) is +1 iff bit k of b is 0."""
    idx = np.arange(2**q)[:, None]
    bits = (idx >> np.arange(q)[None, :]) & 1
    signs = 1.0 - 2.0 * bits
    signs.setflags(write=False)
    return signs


def z_expectations(amps: np.ndarray, q: int) -> np.ndarray:
    """Per-qubit <Z> for amplitude arrays of shape ``(2**q, ...)``; returns ``(..., q)``."""
    probs = amps.real**2 + amps.imag**2
    return np.tensordot(probs, z_sign_matrix(q), axes=(0, 0))


def apply_gate(state: QuantumState, gate: Gate) -> QuantumState:
    """Return the state after ``gate``; the input state is left untouched."""
    q = state.num_qubits
    _check_qubit(gate.target, q)
    if gate.kind == "CNOT":
        _check_qubit(gate.control, q, role="control")
        amps = apply_cnot(state.amplitudes, q, gate.control, gate.target)
    else:
        amps = apply_rotation(state.amplitudes, q, gate.kind, gate.target, gate.angle)
    return QuantumState(q, amps)


def run_circuit(gates, q: int) -> QuantumState:
    state = init_zero_state(q)
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def pauli_z_expectations(state: QuantumState) -> np.ndarray:
    """<Z_k> for every qubit k, each in [-1, 1]."""
    return np.clip(z_expectations(state.amplitudes, state.num_qubits), -1.0, 1.0)
