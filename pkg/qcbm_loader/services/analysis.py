"""
Shot sampling and the marginal-based verification statistics.

Randomness comes from numpy's Philox counter-based generator so counts are
reproducible across platforms for a given seed. Qubit indices are 0-based;
qubit 0 is the most significant bit.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from qcbm_loader.models.errors import QubitIndexError, ResolutionError
from qcbm_loader.models.schemas import MarginalSet, TrainConfig
from qcbm_loader.services.circuit import GridLayout, ParameterizedCircuit, append_layer
from qcbm_loader.services.distribution import ProbabilityVector, coarse_grain
from qcbm_loader.services.statevector import (
    diagonal_observable_gradient,
    run_circuit,
    z_expectation,
    z_signs,
)
from qcbm_loader.services.training import AdamState, adam_step

logger = logging.getLogger(__name__)

MIXED_MARGINAL = 0.5
# |<Z>| at or below this is a tie
TIE_TOLERANCE = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class ShotCounts:
    num_qubits: int
    shots: int
    counts: Dict[int, int]

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError(f"counts sum to {sum(self.counts.values())}, expected {self.shots} shots")
        for index, count in self.counts.items():
            if index < 0 or index >= (1 << self.num_qubits):
                raise ValueError(f"outcome {index} outside 2^{self.num_qubits}")
            if count < 0:
                raise ValueError("negative count")

    @classmethod
    def from_array(cls, num_qubits: int, counts: np.ndarray) -> "ShotCounts":
        nonzero = np.flatnonzero(counts)
        return cls(num_qubits, int(counts.sum()), {int(i): int(counts[i]) for i in nonzero})

    def to_array(self) -> np.ndarray:
        values = np.zeros(1 << self.num_qubits, dtype=np.int64)
        for index, count in self.counts.items():
            values[index] = count
        return values

    def to_distribution(self) -> ProbabilityVector:
        return ProbabilityVector.from_weights(self.to_array())


def sample_shots(p: ProbabilityVector, shots: int, seed: int) -> ShotCounts:
    """I.i.d. draws from p by inverse CDF."""
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    cdf = np.cumsum(p.mass)
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, make_rng(seed).random(shots), side="right")
    return ShotCounts.from_array(p.num_qubits, np.bincount(draws, minlength=p.mass.size))


def _check_subset(subset: Sequence[int], n: int) -> List[int]:
    subset = list(subset)
    if not subset:
        raise ValueError("qubit subset must not be empty")
    for qubit in subset:
        if qubit < 0 or qubit >= n:
            raise QubitIndexError(f"qubit {qubit} outside register of {n}")
    return subset


def empirical_marginals(counts: ShotCounts, subset: Sequence[int], ideal: Optional[Sequence[float]] = None) -> MarginalSet:
    """P_i = fraction of shots reading qubit i as 0."""
    subset = _check_subset(subset, counts.num_qubits)
    estimates = []
    for qubit in subset:
        shift = counts.num_qubits - 1 - qubit
        zeros = sum(count for index, count in counts.counts.items() if not (index >> shift) & 1)
        estimates.append(zeros / counts.shots)
    return MarginalSet(subset=subset, estimates=estimates, ideal=list(ideal) if ideal is not None else None)


def exact_marginals(p: ProbabilityVector, subset: Sequence[int]) -> List[float]:
    """P*_i straight from a distribution."""
    subset = _check_subset(subset, p.num_qubits)
    return [float(min(1.0, p.mass.reshape(1 << q, 2, -1)[:, 0, :].sum())) for q in subset]


def l1_marginals(estimates: Sequence[float], ideal: Sequence[float], subset: Sequence[int]) -> float:
    """Sum over the subset of |P_i - P*_i|; both sequences are aligned with `subset`."""
    if not (len(estimates) == len(ideal) == len(subset)):
        raise ValueError(f"marginal sets of size {len(estimates)} and {len(ideal)} for a subset of {len(subset)}")
    return float(np.abs(np.asarray(estimates, dtype=np.float64) - np.asarray(ideal, dtype=np.float64)).sum())


def mixed_baseline_l1(ideal: Sequence[float], subset: Sequence[int]) -> float:
    return l1_marginals([MIXED_MARGINAL] * len(subset), ideal, subset)


def finite_shot_percentile(
    ideal: Sequence[float],
    subset: Sequence[int],
    shots: int,
    trials: int,
    percentile: float,
    seed: int,
    tail: str = "lower",
) -> float:
    """
    Monte Carlo L1 of a maximally mixed device read out with finite shots.

    Each trial draws `shots` fair bits per qubit (independently per qubit)
    with seed ``seed ^ trial`` and scores them against `ideal`. The result is
    a nearest-rank percentile over trials. With tail="lower" it is the
    value that `percentile` % of mixed experiments reach or exceed, which is
    the bound a real device must beat; tail="upper" ranks ascending.
    """
    if not 0 < percentile <= 100:
        raise ValueError(f"percentile {percentile} outside (0, 100]")
    if shots < 1 or trials < 1:
        raise ValueError("shots and trials must be positive")
    if tail not in ("lower", "upper"):
        raise ValueError(f"tail must be 'lower' or 'upper', got {tail!r}")
    if trials < 100:
        logger.warning("only %d Monte Carlo trials, percentile is coarse", trials)
    values = np.empty(trials)
    for trial in range(trials):
        zeros = make_rng(seed ^ trial).binomial(shots, MIXED_MARGINAL, size=len(subset))
        values[trial] = l1_marginals(zeros / shots, ideal, subset)
    ordered = np.sort(values)
    if tail == "lower":
        ordered = ordered[::-1]
    rank = max(1, math.ceil(percentile / 100.0 * trials))
    return float(ordered[rank - 1])


def top_bits_histogram(source: Union[ShotCounts, ProbabilityVector], k: int) -> ProbabilityVector:
    """Distribution over the k most significant bits."""
    if k < 0 or k > source.num_qubits:
        raise ResolutionError(f"cannot keep {k} of {source.num_qubits} bits")
    if isinstance(source, ProbabilityVector):
        return coarse_grain(source, k)
    shift = source.num_qubits - k
    weights = np.zeros(1 << k)
    for index, count in source.counts.items():
        weights[index >> shift] += count
    return ProbabilityVector.from_weights(weights)


def depolarized_reference(ideal: Sequence[float], subset: Sequence[int]) -> MarginalSet:
    """Marginals a fully depolarized experiment would report."""
    return MarginalSet(subset=list(subset), estimates=[MIXED_MARGINAL] * len(subset), ideal=list(ideal))


# Readout-observable learning

@dataclass
class ReadoutResult:
    circuit: ParameterizedCircuit
    params: np.ndarray
    initial_value: float
    value: float
    converged: bool
    iterations: int
    trace: List[float] = field(default_factory=list)


def train_readout(
    circuit: ParameterizedCircuit,
    params: Sequence[float],
    qubit: int,
    layout: GridLayout,
    config: Optional[TrainConfig] = None,
) -> ReadoutResult:
    """
    Push <Z> of a most-significant qubit away from zero.

    One extra layer (RY, RZ per qubit, RZZ per grid edge, closing RY per
    qubit) is appended and only its parameters are optimized against
    (<Z> - t)^2, with t the extreme on the side of the initial value (ties
    go to +1). Training stops once |<Z>| reaches the threshold or the
    iteration cap runs out; the best value seen is returned either way.
    """
    config = config or TrainConfig()
    leading = layout.leading_qubits()
    if qubit not in leading or qubit not in circuit.register:
        raise QubitIndexError(f"qubit {qubit} is not a most-significant qubit of the block ({leading})")
    position = list(circuit.register).index(qubit)
    base = np.asarray(params, dtype=np.float64)
    initial = z_expectation(run_circuit(circuit, base, config.max_qubits), position)
    if abs(initial) >= config.readout_threshold:
        return ReadoutResult(circuit, base.copy(), initial, initial, True, 0, [initial])

    extreme = -1.0 if initial < -TIE_TOLERANCE else 1.0
    extended = append_layer(circuit, layout, closing_rotation=True)
    fresh = extended.num_params - circuit.num_params
    # small offsets keep the fresh layer off the all-zero saddle
    new = make_rng(config.seed).normal(0.0, 0.01, size=fresh)
    signs = z_signs(len(extended.register), position)
    step_config = config.model_copy(update={"learning_rate": config.readout_learning_rate})
    state = AdamState.zeros(fresh)

    best_value, best_new = initial, np.zeros(fresh)
    trace = [initial]
    iteration = 0
    for iteration in range(1, config.readout_iterations + 1):
        full = np.concatenate([base, new])
        final = run_circuit(extended, full, config.max_qubits)
        value = z_expectation(final, position)
        trace.append(value)
        if abs(value - extreme) < abs(best_value - extreme):
            best_value, best_new = value, new.copy()
        if abs(value) >= config.readout_threshold and value * extreme > 0:
            break
        grad = 2.0 * (value - extreme) * diagonal_observable_gradient(
            extended, full, signs, final_state=final, max_qubits=config.max_qubits
        )
        new, state = adam_step(new, grad[circuit.num_params:], state, step_config)

    converged = abs(best_value) >= config.readout_threshold and best_value * extreme > 0
    if not converged:
        logger.warning("readout on qubit %d reached <Z> = %.4f after %d iterations", qubit, best_value, iteration)
    return ReadoutResult(extended, np.concatenate([base, best_new]), initial, best_value, converged, iteration, trace)
