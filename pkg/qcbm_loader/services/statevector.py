"""
Dense statevector simulation.

Amplitudes are stored as a flat complex128 array of length 2^n; qubit 0 is the
most significant bit of the index, so basis state |b_1 ... b_n> lives at
x = sum_i b_i 2^(n-i). Gate kernels work on an ``(2,)*n`` view of that array
and only touch the amplitude pairs that differ in the acted-on qubit(s).

Gate conventions:
    RY(t)  = exp(-i t Y / 2)
    RZ(t)  = exp(-i t Z / 2)
    RZZ(t) = exp(-i t Z(x)Z / 2)
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from qcbm_loader.models.errors import CapacityError, ParameterCountError, QubitIndexError
from qcbm_loader.models.schemas import Gate, GateKindEnum
from qcbm_loader.services.distribution import ProbabilityVector

logger = logging.getLogger(__name__)

DEFAULT_MAX_QUBITS = 24
_SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Statevector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError(
                f"expected {1 << self.num_qubits} amplitudes for {self.num_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)


def zero_state(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> Statevector:
    """|0^n> with n checked against the qubit cap."""
    if n < 1 or n > max_qubits:
        raise CapacityError(f"register of {n} qubits outside [1, {max_qubits}]")
    amplitudes = np.zeros(1 << n, dtype=np.complex128)
    amplitudes[0] = 1.0
    return Statevector(n, amplitudes)


def _index(n: int, fixed: Sequence[Tuple[int, int]]) -> tuple:
    idx = [slice(None)] * n
    for qubit, bit in fixed:
        idx[qubit] = bit
    return tuple(idx)


def _check_qubits(qubits: Sequence[int], n: int) -> None:
    for qubit in qubits:
        if qubit < 0 or qubit >= n:
            raise QubitIndexError(f"qubit {qubit} outside register of {n}")


def _apply_inplace(tensor: np.ndarray, kind: GateKindEnum, qubits: Sequence[int], angle: float) -> None:
    n = tensor.ndim
    if kind in (GateKindEnum.H, GateKindEnum.X, GateKindEnum.RY, GateKindEnum.RZ):
        q = qubits[0]
        i0, i1 = _index(n, [(q, 0)]), _index(n, [(q, 1)])
        if kind == GateKindEnum.RZ:
            tensor[i0] *= complex(math.cos(angle / 2), -math.sin(angle / 2))
            tensor[i1] *= complex(math.cos(angle / 2), math.sin(angle / 2))
            return
        a0 = tensor[i0].copy()
        a1 = tensor[i1].copy()
        if kind == GateKindEnum.H:
            tensor[i0] = (a0 + a1) * _SQRT_HALF
            tensor[i1] = (a0 - a1) * _SQRT_HALF
        elif kind == GateKindEnum.X:
            tensor[i0] = a1
            tensor[i1] = a0
        else:
            c, s = math.cos(angle / 2), math.sin(angle / 2)
            tensor[i0] = c * a0 - s * a1
            tensor[i1] = s * a0 + c * a1
        return

    a, b = qubits
    if kind == GateKindEnum.RZZ:
        same = complex(math.cos(angle / 2), -math.sin(angle / 2))
        diff = same.conjugate()
        for bit_a in (0, 1):
            for bit_b in (0, 1):
                tensor[_index(n, [(a, bit_a), (b, bit_b)])] *= same if bit_a == bit_b else diff
    elif kind == GateKindEnum.CNOT:
        i10 = _index(n, [(a, 1), (b, 0)])
        i11 = _index(n, [(a, 1), (b, 1)])
        swap = tensor[i10].copy()
        tensor[i10] = tensor[i11]
        tensor[i11] = swap
    else:
        raise ValueError(f"unsupported gate kind {kind}")


def _apply_generator(tensor: np.ndarray, kind: GateKindEnum, qubits: Sequence[int]) -> None:
    """Multiply by the Pauli generator G of a rotation exp(-i t G / 2)."""
    n = tensor.ndim
    if kind == GateKindEnum.RY:
        q = qubits[0]
        i0, i1 = _index(n, [(q, 0)]), _index(n, [(q, 1)])
        a0 = tensor[i0].copy()
        tensor[i0] = -1j * tensor[i1]
        tensor[i1] = 1j * a0
    elif kind == GateKindEnum.RZ:
        tensor[_index(n, [(qubits[0], 1)])] *= -1
    elif kind == GateKindEnum.RZZ:
        a, b = qubits
        tensor[_index(n, [(a, 0), (b, 1)])] *= -1
        tensor[_index(n, [(a, 1), (b, 0)])] *= -1
    else:
        raise ValueError(f"{kind} has no generator")


def _resolve_angle(gate: Gate, params: Optional[np.ndarray]) -> float:
    if gate.angle is not None:
        return gate.angle
    if gate.param is None:
        return 0.0
    if params is None:
        raise ParameterCountError(f"gate {gate.kind.value} references slot {gate.param} but no parameters were bound")
    return float(params[gate.param])


def apply_gate(state: Statevector, gate: Gate, angle: Optional[float] = None) -> Statevector:
    """
    Apply one gate and return the new state.

    Args:
        state: Input state (left untouched)
        gate: Gate with local qubit indices
        angle: Angle for a gate bound to a parameter slot; rejected for any other gate

    Returns:
        New Statevector
    """
    _check_qubits(gate.qubits, state.num_qubits)
    if angle is not None and gate.param is None:
        raise ValueError(f"{gate.kind.value} gate is not bound to a parameter slot, got angle {angle}")
    if gate.angle is not None:
        theta = gate.angle
    elif gate.param is not None:
        if angle is None:
            raise ParameterCountError(f"angle required for parameter slot {gate.param}")
        theta = float(angle)
    else:
        theta = 0.0
    if not math.isfinite(theta):
        raise ValueError(f"non-finite angle {theta}")
    amplitudes = state.amplitudes.copy()
    _apply_inplace(amplitudes.reshape((2,) * state.num_qubits), gate.kind, gate.qubits, theta)
    return Statevector(state.num_qubits, amplitudes)


def _check_params(circuit, params: Sequence[float]) -> np.ndarray:
    values = np.asarray(params, dtype=np.float64)
    if values.shape != (circuit.num_params,):
        raise ParameterCountError(
            f"circuit has {circuit.num_params} parameter slots, got vector of shape {values.shape}"
        )
    return values


def run_circuit(circuit, params: Sequence[float], max_qubits: int = DEFAULT_MAX_QUBITS) -> Statevector:
    """Simulate U(params)|0> over the circuit's register, gates in list order."""
    values = _check_params(circuit, params)
    state = zero_state(len(circuit.register), max_qubits)
    tensor = state.tensor()
    for gate in circuit.local_gates():
        _apply_inplace(tensor, gate.kind, gate.qubits, _resolve_angle(gate, values))
    return state


def born_distribution(state: Statevector) -> ProbabilityVector:
    mass = state.amplitudes.real ** 2 + state.amplitudes.imag ** 2
    return ProbabilityVector(state.num_qubits, mass)


def marginal_prob0(state: Statevector, qubit: int) -> float:
    """P_i: probability of reading `qubit` as 0."""
    _check_qubits([qubit], state.num_qubits)
    mass = state.amplitudes.real ** 2 + state.amplitudes.imag ** 2
    view = mass.reshape(1 << qubit, 2, -1)
    return float(min(1.0, max(0.0, view[:, 0, :].sum())))


def z_expectation(state: Statevector, qubit: int) -> float:
    return 2.0 * marginal_prob0(state, qubit) - 1.0


def z_signs(num_qubits: int, qubit: int) -> np.ndarray:
    """+1 where `qubit` reads 0, -1 where it reads 1, over all 2^n indices."""
    signs = np.ones((1 << qubit, 2, 1 << (num_qubits - qubit - 1)))
    signs[:, 1, :] = -1.0
    return signs.reshape(-1)


def diagonal_observable_gradient(
    circuit,
    params: Sequence[float],
    weights: np.ndarray,
    final_state: Optional[Statevector] = None,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> np.ndarray:
    """
    Adjoint-mode gradient of E(params) = sum_x w(x) |psi(x)|^2.

    One backward sweep un-applies every gate to both the state and the
    weighted co-state; each rotation contributes Im<lambda|G|psi> to its slot.
    Memory stays at a few vectors of length 2^n.

    Args:
        circuit: ParameterizedCircuit
        params: Parameter vector
        weights: Real diagonal of the observable, length 2^n
        final_state: Forward result for `params` if already computed

    Returns:
        Gradient with one entry per parameter slot
    """
    values = _check_params(circuit, params)
    if final_state is None:
        final_state = run_circuit(circuit, values, max_qubits)
    n = final_state.num_qubits
    shape = (2,) * n
    phi = final_state.amplitudes.copy()
    lam = np.asarray(weights, dtype=np.float64) * phi
    phi_t, lam_t = phi.reshape(shape), lam.reshape(shape)
    scratch = np.empty_like(phi)
    scratch_t = scratch.reshape(shape)
    grad = np.zeros(circuit.num_params)
    for gate in reversed(circuit.local_gates()):
        theta = _resolve_angle(gate, values)
        if gate.param is not None:
            np.copyto(scratch, phi)
            _apply_generator(scratch_t, gate.kind, gate.qubits)
            grad[gate.param] += np.vdot(lam, scratch).imag
        _apply_inplace(phi_t, gate.kind, gate.qubits, -theta)
        _apply_inplace(lam_t, gate.kind, gate.qubits, -theta)
    return grad
