"""Depth-1 variational quantum circuit used as a bounded nonlinear map.

Circuit for ``q`` qubits and a real input vector ``x`` of length ``q``::

    |0...0>  ->  RY(enc(x_k)) on every qubit        (angle encoding)
             ->  RZ(theta_k1) then RY(theta_k0) per qubit (variational layer)
             ->  CNOT entangler                      (ring by default)
             ->  <Z_k> per qubit

``enc`` defaults to ``2 * atan(x)``, so unbounded inputs map into
``(-pi, pi)``. The ring entangler applies CNOT(k -> k+1 mod q) for
k = 0..q-1; with two qubits only the single CNOT(0 -> 1) is used, and a
single qubit gets no entangler.

The phase rotation sits between the two RY rotations. Placed last, just
before the CNOTs, it would commute with everything up to the Z readout
and its angle would have no effect.

All functions broadcast: ``inputs`` may have shape ``(..., q)`` and the
angles ``(..., q, 2)``; leading dimensions are independent circuits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quantum_sim as qs
from .exceptions import ConfigError

ENCODINGS = ("atan", "linear")
ENTANGLERS = ("ring", "chain", "none")


@dataclass
class VqcParams:
    num_qubits: int
    variational_angles: np.ndarray

    def __post_init__(self):
        self.variational_angles = np.asarray(self.variational_angles, dtype=float)
        if self.variational_angles.shape != (self.num_qubits, 2):
            raise ConfigError(
                f"variational angles must have shape ({self.num_qubits}, 2), "
                f"got {self.variational_angles.shape}"
            )
        if not np.all(np.isfinite(self.variational_angles)):
            raise ConfigError("variational angles must be finite")


@dataclass
class VqcGradient:
    d_angles: np.ndarray
    d_input: np.ndarray


def encode_angles(x, encoding="atan"):
    if encoding == "atan":
        return 2.0 * np.arctan(x)
    if encoding == "linear":
        return np.asarray(x, dtype=float)
    raise ConfigError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def encode_derivative(x, encoding="atan"):
    if encoding == "atan":
        return 2.0 / (1.0 + np.square(x))
    if encoding == "linear":
        return np.ones_like(np.asarray(x, dtype=float))
    raise ConfigError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")


def entangler_pairs(q, entangler="ring"):
    """(control, target) pairs of the entangling layer, in application order."""
    if entangler not in ENTANGLERS:
        raise ConfigError(f"unknown entangler {entangler!r}; expected one of {ENTANGLERS}")
    if q == 1 or entangler == "none":
        return []
    pairs = [(k, k + 1) for k in range(q - 1)]
    if entangler == "ring" and q > 2:
        pairs.append((q - 1, 0))
    return pairs


def circuit_gates(x, angles, entangler="ring", encoding="atan"):
    """Explicit :class:`~qlstm_rbf.quantum_sim.Gate` list for one unbatched circuit."""
    x = np.asarray(x, dtype=float)
    angles = np.asarray(angles, dtype=float)
    q = x.shape[0]
    enc = encode_angles(x, encoding)
    gates = [qs.Gate("RY", k, angle=float(enc[k])) for k in range(q)]
    for k in range(q):
        gates.append(qs.Gate("RZ", k, angle=float(angles[k, 1])))
        gates.append(qs.Gate("RY", k, angle=float(angles[k, 0])))
    gates.extend(qs.Gate("CNOT", t, control=c) for c, t in entangler_pairs(q, entangler))
    return gates


def _ops(q, entangler):
    # (kind, qubit, control, parameter slot); slot ("enc", k) or ("var", k, j)
    ops = [("RY", k, None, ("enc", k)) for k in range(q)]
    for k in range(q):
        ops.append(("RZ", k, None, ("var", k, 1)))
        ops.append(("RY", k, None, ("var", k, 0)))
    ops.extend(("CNOT", t, c, None) for c, t in entangler_pairs(q, entangler))
    return ops


def _slot_angle(slot, enc, angles):
    if slot[0] == "enc":
        return enc[..., slot[1]]
    return angles[..., slot[1], slot[2]]


def _final_state(enc, angles, q, entangler):
    batch = np.broadcast_shapes(enc.shape[:-1], angles.shape[:-2])
    amps = qs.zero_amplitudes(q, batch)
    for kind, k, control, slot in _ops(q, entangler):
        if kind == "CNOT":
            amps = qs.apply_cnot(amps, q, control, k)
        else:
            amps = qs.apply_rotation(amps, q, kind, k, _slot_angle(slot, enc, angles))
    return amps


def _as_angles(params):
    if isinstance(params, VqcParams):
        return params.variational_angles
    return np.asarray(params, dtype=float)


def _check_shapes(x, angles):
    if x.ndim < 1:
        raise ConfigError("VQC input must be at least one-dimensional")
    q = x.shape[-1]
    if angles.shape[-2:] != (q, 2):
        raise ConfigError(f"input width {q} does not match angle shape {angles.shape}")
    if not 1 <= q <= qs.MAX_QUBITS:
        raise ConfigError(f"VQC width must be in [1, {qs.MAX_QUBITS}], got {q}")
    return q


def vqc_forward(x, params, entangler="ring", encoding="atan"):
    """Pauli-Z readout of the circuit for input ``x``; every entry lies in [-1, 1]."""
    x = np.asarray(x, dtype=float)
    angles = _as_angles(params)
    q = _check_shapes(x, angles)
    if not np.all(np.isfinite(x)):
        raise ConfigError("VQC input must be finite")
    amps = _final_state(encode_angles(x, encoding), angles, q, entangler)
    return qs.z_expectations(amps, q)


def forward_with_state(x, angles, entangler="ring", encoding="atan"):
    """Like :func:`vqc_forward` but also returns the final amplitudes for reuse in backward."""
    q = x.shape[-1]
    amps = _final_state(encode_angles(x, encoding), angles, q, entangler)
    return qs.z_expectations(amps, q), amps


def vqc_backward(x, params, upstream, entangler="ring", encoding="atan", final_state=None):
    """Exact gradient of ``sum(upstream * vqc_forward(x, params))`` by the adjoint method.

    The final state is walked backwards gate by gate together with the
    observable-weighted state, so the cost is linear in the gate count.
    Returned ``d_angles`` has the broadcast batch shape of ``x`` and the
    angles; callers that share angles across a batch sum it themselves.
    """
    x = np.asarray(x, dtype=float)
    angles = _as_angles(params)
    q = _check_shapes(x, angles)
    upstream = np.asarray(upstream, dtype=float)
    enc = encode_angles(x, encoding)
    psi = final_state if final_state is not None else _final_state(enc, angles, q, entangler)
    batch = psi.shape[1:]

    diag = np.moveaxis(upstream @ qs.z_sign_matrix(q).T, -1, 0)
    lam = psi * diag

    d_enc = np.zeros(batch + (q,))
    d_var = np.zeros(batch + (q, 2))
    for kind, k, control, slot in reversed(_ops(q, entangler)):
        if kind == "CNOT":
            psi = qs.apply_cnot(psi, q, control, k)
            lam = qs.apply_cnot(lam, q, control, k)
            continue
        g_psi = qs.apply_pauli(psi, q, qs.GENERATOR[kind], k)
        grad = np.sum(lam.real * g_psi.imag - lam.imag * g_psi.real, axis=0)
        if slot[0] == "enc":
            d_enc[..., slot[1]] = grad
        else:
            d_var[..., slot[1], slot[2]] = grad
        angle = _slot_angle(slot, enc, angles)
        psi = qs.apply_rotation(psi, q, kind, k, angle, adjoint=True)
        lam = qs.apply_rotation(lam, q, kind, k, angle, adjoint=True)

    return VqcGradient(d_angles=d_var, d_input=d_enc * encode_derivative(x, encoding))


def parameter_shift_gradient(x, params, upstream, entangler="ring", encoding="atan"):
    """Gradient by the two-term shift rule ``(f(t + pi/2) - f(t - pi/2)) / 2``.

    Used as an independent check on :func:`vqc_backward`. Input gradients
    shift the encoding angle and then chain through the encoding map.
    """
    x = np.asarray(x, dtype=float)
    angles = _as_angles(params)
    q = _check_shapes(x, angles)
    upstream = np.asarray(upstream, dtype=float)
    enc = encode_angles(x, encoding)
    batch = np.broadcast_shapes(enc.shape[:-1], angles.shape[:-2])
    enc = np.broadcast_to(enc, batch + (q,))
    angles = np.broadcast_to(angles, batch + (q, 2))

    def readout(e, a):
        return np.sum(upstream * qs.z_expectations(_final_state(e, a, q, entangler), q), axis=-1)

    shift = np.pi / 2
    d_enc = np.zeros(batch + (q,))
    d_var = np.zeros(batch + (q, 2))
    for k in range(q):
        plus, minus = enc.copy(), enc.copy()
        plus[..., k] += shift
        minus[..., k] -= shift
        d_enc[..., k] = 0.5 * (readout(plus, angles) - readout(minus, angles))
        for j in range(2):
            plus, minus = angles.copy(), angles.copy()
            plus[..., k, j] += shift
            minus[..., k, j] -= shift
            d_var[..., k, j] = 0.5 * (readout(enc, plus) - readout(enc, minus))
    return VqcGradient(d_angles=d_var, d_input=d_enc * encode_derivative(x, encoding))
