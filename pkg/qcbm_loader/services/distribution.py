"""
Probability vectors over n-bit strings and the resolution-changing
comparisons between them.

Index x of an n-bit string is sum_i b_i 2^(n-i): the first bit is the most
significant. Coarse graining drops least-significant bits by summing
neighbouring bins; expansion splits each bin evenly, which is what adding
least-significant qubits in |+> does to a Born distribution.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qcbm_loader.models.errors import ResolutionError

logger = logging.getLogger(__name__)

KL_EPSILON = 1e-12
_SUM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ProbabilityVector:
    num_qubits: int
    mass: np.ndarray
    norm_constant: float = 1.0

    def __post_init__(self):
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        if self.mass.shape != (1 << self.num_qubits,):
            raise ResolutionError(
                f"expected {1 << self.num_qubits} entries for {self.num_qubits} qubits, got {self.mass.shape}"
            )
        if np.any(self.mass < 0):
            raise ValueError("probability mass must be non-negative")
        total = float(self.mass.sum())
        if abs(total - 1.0) > _SUM_TOLERANCE:
            raise ValueError(f"probability mass sums to {total}, expected 1")
        if not self.norm_constant > 0:
            raise ValueError("norm_constant must be positive")

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "ProbabilityVector":
        """Normalize non-negative weights, keeping their total as norm_constant."""
        values = np.asarray(weights, dtype=np.float64).reshape(-1)
        size = values.shape[0]
        if size == 0 or size & (size - 1):
            raise ResolutionError(f"length {size} is not a power of two")
        if np.any(values < 0):
            raise ValueError("weights must be non-negative")
        total = float(values.sum())
        if total <= 0:
            raise ValueError("weights sum to zero, no distribution exists")
        return cls(size.bit_length() - 1, values / total, total)

    def with_mass(self, mass: np.ndarray, num_qubits: int) -> "ProbabilityVector":
        return ProbabilityVector(num_qubits, mass, self.norm_constant)


def index_of_bitstring(bits: Sequence[int]) -> int:
    x = 0
    for bit in bits:
        if bit not in (0, 1):
            raise ValueError(f"non-binary entry {bit!r}")
        x = (x << 1) | int(bit)
    return x


def bitstring_of_index(x: int, n: int) -> list:
    if x < 0 or x >= (1 << n):
        raise ValueError(f"index {x} outside [0, 2^{n})")
    return [(x >> (n - 1 - i)) & 1 for i in range(n)]


def coarse_grain(p: ProbabilityVector, m: int) -> ProbabilityVector:
    if m < 0 or m > p.num_qubits:
        raise ResolutionError(f"cannot coarse grain {p.num_qubits} qubits to {m}")
    if m == p.num_qubits:
        return p
    mass = p.mass.reshape(1 << m, -1).sum(axis=1)
    return p.with_mass(mass, m)


def expand(p: ProbabilityVector, m: int) -> ProbabilityVector:
    if m < p.num_qubits:
        raise ResolutionError(f"cannot expand {p.num_qubits} qubits to {m}")
    if m == p.num_qubits:
        return p
    factor = 1 << (m - p.num_qubits)
    mass = np.repeat(p.mass / factor, factor)
    return p.with_mass(mass, m)


def at_resolution(p: ProbabilityVector, m: int) -> ProbabilityVector:
    if m < 1:
        raise ResolutionError(f"resolution must be at least 1, got {m}")
    if m > p.num_qubits:
        return expand(p, m)
    if m < p.num_qubits:
        return coarse_grain(p, m)
    return p


def marginalize_register(p: ProbabilityVector, register: Sequence[int], keep: Sequence[int]) -> ProbabilityVector:
    """
    Sum out every qubit of `register` not listed in `keep`.

    `register` labels the bits of p in order (most significant first); the
    result is indexed by `keep` in the order given.
    """
    register = list(register)
    if len(register) != p.num_qubits:
        raise ResolutionError(f"register of {len(register)} labels for {p.num_qubits} qubits")
    missing = [label for label in keep if label not in register]
    if missing:
        raise ResolutionError(f"labels {missing} not in register")
    tensor = p.mass.reshape((2,) * p.num_qubits)
    drop = tuple(i for i, label in enumerate(register) if label not in keep)
    reduced = tensor.sum(axis=drop) if drop else tensor
    kept = [label for label in register if label in keep]
    order = [kept.index(label) for label in keep]
    mass = np.transpose(reduced, order).reshape(-1) if order else reduced.reshape(-1)
    return p.with_mass(np.ascontiguousarray(mass), len(keep))


def insert_plus_qubits(p: ProbabilityVector, register: Sequence[int], target_register: Sequence[int]) -> ProbabilityVector:
    """
    Embed p into a larger register, each new qubit carrying a uniform bit.

    Both registers are label sequences in significance order and
    `register` must be contained in `target_register`. With register and
    target both equal to range(...) this reduces to `expand`.
    """
    register, target_register = list(register), list(target_register)
    if len(register) != p.num_qubits:
        raise ResolutionError(f"register of {len(register)} labels for {p.num_qubits} qubits")
    if not set(register) <= set(target_register):
        raise ResolutionError("target register must contain the source register")
    positions = [label for label in target_register if label in register]
    tensor = p.mass.reshape((2,) * p.num_qubits) if p.num_qubits else p.mass.reshape(())
    tensor = np.transpose(tensor, [register.index(label) for label in positions]) if positions else tensor
    new_axes = [i for i, label in enumerate(target_register) if label not in register]
    for axis in new_axes:
        tensor = np.expand_dims(tensor, axis)
    shape = (2,) * len(target_register)
    mass = np.broadcast_to(tensor, shape) / float(1 << len(new_axes))
    return p.with_mass(np.ascontiguousarray(mass).reshape(-1), len(target_register))


def _align(p: ProbabilityVector, q: ProbabilityVector, m: int):
    return at_resolution(p, m).mass, at_resolution(q, m).mass


def kl_divergence(p: ProbabilityVector, q: ProbabilityVector, m: int, epsilon: float = KL_EPSILON) -> float:
    """KL(p|q) at resolution m, natural log; p = 0 terms vanish and q is clamped at epsilon."""
    pm, qm = _align(p, q, m)
    support = pm > 0
    ratio = pm[support] / np.maximum(qm[support], epsilon)
    return float(max(0.0, np.sum(pm[support] * np.log(ratio))))


def tvd(p: ProbabilityVector, q: ProbabilityVector, m: int) -> float:
    pm, qm = _align(p, q, m)
    return float(min(1.0, 0.5 * np.abs(pm - qm).sum()))


def classical_fidelity(p: ProbabilityVector, q: ProbabilityVector, m: int) -> float:
    pm, qm = _align(p, q, m)
    overlap = float(np.sqrt(pm * qm).sum())
    return min(1.0, overlap * overlap)
