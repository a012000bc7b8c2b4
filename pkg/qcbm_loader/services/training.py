"""
KL training of the grid ansatz: loss and adjoint gradient, Adam, a single
stage, the coarse-to-fine hierarchy, the flat baseline and block-amplitude
encoding (one independent model per image tile).
"""

import logging
import math
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from qcbm_loader.models.errors import QcbmError, ResolutionError, TrainingError
from qcbm_loader.models.schemas import CircuitDocument, HierarchySchedule, StageReport, TrainConfig
from qcbm_loader.services.circuit import (
    GridLayout,
    ParameterizedCircuit,
    build_stage_circuit,
    count_two_qubit_gates,
    flat_schedule,
    hierarchical_schedule,
    initial_parameters,
    lift_parameters,
)
from qcbm_loader.services.distribution import (
    ProbabilityVector,
    classical_fidelity,
    insert_plus_qubits,
    kl_divergence,
    tvd,
)
from qcbm_loader.services.image_io import (
    BlockDecomposition,
    GrayImage,
    assemble_blocks,
    assembled_intensity,
    image_to_distribution,
    intensity_tvd,
    partition_blocks,
    stage_target,
)
from qcbm_loader.services.statevector import born_distribution, diagonal_observable_gradient, run_circuit

logger = logging.getLogger(__name__)

Monitor = Callable[[int, np.ndarray, ProbabilityVector], None]


# Loss and gradient

def _check_target(circuit: ParameterizedCircuit, target: ProbabilityVector) -> None:
    if target.num_qubits != len(circuit.register):
        raise ResolutionError(
            f"target has {target.num_qubits} qubits, circuit simulates {len(circuit.register)}"
        )


def kl_loss_and_gradient(
    circuit: ParameterizedCircuit,
    params: Sequence[float],
    target: ProbabilityVector,
    config: Optional[TrainConfig] = None,
) -> Tuple[float, np.ndarray, ProbabilityVector]:
    """
    KL(target | q_params) and its exact gradient from one forward and one
    backward sweep.

    The gradient is -sum_x p(x)/q(x) dq(x)/dparams, taken over x where the
    clamp q > epsilon is inactive (the clamped terms are constant).

    Returns:
        (loss, gradient, model distribution)
    """
    config = config or TrainConfig()
    _check_target(circuit, target)
    state = run_circuit(circuit, params, config.max_qubits)
    q = born_distribution(state)
    loss = kl_divergence(target, q, target.num_qubits, config.kl_epsilon)
    unclamped = q.mass > config.kl_epsilon
    weights = np.zeros_like(q.mass)
    weights[unclamped] = target.mass[unclamped] / q.mass[unclamped]
    grad = -diagonal_observable_gradient(circuit, params, weights, final_state=state, max_qubits=config.max_qubits)
    return loss, grad, q


def kl_loss(
    circuit: ParameterizedCircuit,
    params: Sequence[float],
    target: ProbabilityVector,
    config: Optional[TrainConfig] = None,
) -> float:
    config = config or TrainConfig()
    _check_target(circuit, target)
    q = born_distribution(run_circuit(circuit, params, config.max_qubits))
    return kl_divergence(target, q, target.num_qubits, config.kl_epsilon)


def kl_gradient(
    circuit: ParameterizedCircuit,
    params: Sequence[float],
    target: ProbabilityVector,
    config: Optional[TrainConfig] = None,
) -> np.ndarray:
    return kl_loss_and_gradient(circuit, params, target, config)[1]


# Adam

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0)


def adam_step(
    params: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    config: TrainConfig,
) -> Tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; inputs are not modified."""
    t = state.t + 1
    m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * grad
    v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * grad * grad
    m_hat = m / (1.0 - config.adam_beta1 ** t)
    v_hat = v / (1.0 - config.adam_beta2 ** t)
    updated = params - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_epsilon)
    return updated, AdamState(m, v, t)


# Stage training

def train_stage(
    circuit: ParameterizedCircuit,
    params0: Sequence[float],
    target: ProbabilityVector,
    config: TrainConfig,
    iterations: Optional[int] = None,
    monitor: Optional[Monitor] = None,
) -> Tuple[np.ndarray, List[float]]:
    """
    Run Adam on one stage circuit.

    Args:
        circuit: Stage circuit, simulated on its register
        params0: Starting parameters (lifted or initialized)
        target: Target at the register's resolution
        config: Optimizer settings
        iterations: Adam steps (config.iterations when omitted)
        monitor: Called as monitor(iteration, params, q) after every evaluation

    Returns:
        (best parameters seen, loss trace); the trace has iterations + 1
        entries, entry 0 being the loss before any update
    """
    _check_target(circuit, target)
    iterations = iterations if iterations is not None else config.iterations
    params = np.array(params0, dtype=np.float64)
    state = AdamState.zeros(circuit.num_params)

    loss, grad, q = kl_loss_and_gradient(circuit, params, target, config)
    trace = [loss]
    best_loss, best_params = loss, params.copy()
    if monitor:
        monitor(0, params, q)

    for iteration in range(1, iterations + 1):
        if circuit.num_params == 0:
            trace.append(loss)
            if monitor:
                monitor(iteration, params, q)
            continue
        params, state = adam_step(params, grad, state, config)
        loss, grad, q = kl_loss_and_gradient(circuit, params, target, config)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise TrainingError(f"non-finite loss or gradient at iteration {iteration}")
        trace.append(loss)
        if loss < best_loss:
            best_loss, best_params = loss, params.copy()
        if monitor:
            monitor(iteration, params, q)
        if iteration % config.log_every == 0:
            logger.debug("iteration %d: KL %.6g (best %.6g)", iteration, loss, best_loss)
    return best_params, trace


# Hierarchical and flat runs

@dataclass
class TrainingResult:
    reports: List[StageReport]
    circuit: ParameterizedCircuit
    params: np.ndarray
    norm_constant: float

    @property
    def final(self) -> StageReport:
        return self.reports[-1]

    def distribution(self, config: Optional[TrainConfig] = None) -> ProbabilityVector:
        max_qubits = (config or TrainConfig()).max_qubits
        return born_distribution(run_circuit(self.circuit, self.params, max_qubits))


def _check_image(image: GrayImage, layout: GridLayout) -> None:
    expected = (1 << layout.num_v, 1 << layout.num_h)
    if image.shape != expected:
        raise ResolutionError(f"{image.height}x{image.width} image does not match a {expected[0]}x{expected[1]} layout")


def hierarchical_train(
    image: GrayImage,
    layout: GridLayout,
    schedule: HierarchySchedule,
    config: TrainConfig,
) -> TrainingResult:
    """
    Train stage by stage: build the stage circuit, lift the previous
    parameters (new slots at zero, new qubits in |+>), train against the
    pooled image at stage resolution, and record KL at stage resolution plus
    TVD / fidelity at full resolution.
    """
    _check_image(image, layout)
    if schedule.stages[-1].columns != layout.cols:
        raise ResolutionError(f"final stage activates {schedule.stages[-1].columns} of {layout.cols} columns")
    full_target = image_to_distribution(image)
    full_register = list(range(layout.num_qubits))

    reports: List[StageReport] = []
    circuit: Optional[ParameterizedCircuit] = None
    params = np.zeros(0)
    for index, spec in enumerate(schedule.stages):
        started = time.perf_counter()
        stage_circuit = build_stage_circuit(layout, schedule, index)
        if circuit is None:
            params = initial_parameters(stage_circuit, config.seed)
        else:
            params = lift_parameters(params, circuit, stage_circuit)
        circuit = stage_circuit
        register = list(circuit.register)
        target = stage_target(image, *layout.active_counts(spec.columns))

        tvd_trace: List[float] = []

        def record(iteration: int, values: np.ndarray, q: ProbabilityVector) -> None:
            expanded = insert_plus_qubits(q, register, full_register)
            tvd_trace.append(tvd(full_target, expanded, layout.num_qubits))

        try:
            params, trace = train_stage(circuit, params, target, config, spec.iterations, monitor=record)
        except QcbmError as exc:
            raise type(exc)(f"stage {index}: {exc}") from exc
        q = born_distribution(run_circuit(circuit, params, config.max_qubits))
        expanded = insert_plus_qubits(q, register, full_register)
        report = StageReport(
            stage=index,
            active_qubits=len(register),
            num_params=circuit.num_params,
            two_qubit_gates=count_two_qubit_gates(circuit),
            kl=kl_divergence(target, q, target.num_qubits, config.kl_epsilon),
            tvd_full=tvd(full_target, expanded, layout.num_qubits),
            fidelity_full=classical_fidelity(full_target, expanded, layout.num_qubits),
            loss_trace=trace,
            tvd_trace=tvd_trace,
            wall_time=time.perf_counter() - started,
        )
        logger.info(
            "stage %d: %d qubits, %d params, KL %.5f, TVD_full %.5f, F_full %.5f (%.1fs)",
            index, report.active_qubits, report.num_params, report.kl,
            report.tvd_full, report.fidelity_full, report.wall_time,
        )
        reports.append(report)
    return TrainingResult(reports, circuit, params, full_target.norm_constant)


def train_flat(
    image: GrayImage,
    layout: GridLayout,
    layers: int,
    iterations: int,
    config: TrainConfig,
) -> TrainingResult:
    """Baseline without hierarchy: the full circuit trained at once, initial layer randomized."""
    return hierarchical_train(image, layout, flat_schedule(layout, layers, iterations), config)


# Block-amplitude encoding

@dataclass
class BlockOutcome:
    block_id: int
    norm: float
    document: Optional[CircuitDocument] = None
    tvd: Optional[float] = None
    error: Optional[str] = None

    @property
    def num_params(self) -> int:
        return self.document.num_params if self.document else 0

    def model(self) -> Tuple[ParameterizedCircuit, np.ndarray]:
        return ParameterizedCircuit.from_document(self.document)


@dataclass
class BaeResult:
    decomposition: BlockDecomposition
    outcomes: List[BlockOutcome]
    reconstruction: GrayImage
    assembled_tvd: float
    qubits_per_block: int
    failures: List[int] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        return sum(outcome.num_params for outcome in self.outcomes)

    @property
    def total_qubits(self) -> int:
        return self.qubits_per_block * len(self.outcomes)


def block_schedule(
    layout: GridLayout,
    layers: Union[int, Sequence[int]],
    total_iterations: int,
    flat: bool = False,
) -> HierarchySchedule:
    """Per-block schedule; an int layer count means that many layers on every stage."""
    if flat:
        count = layers if isinstance(layers, int) else sum(layers)
        return flat_schedule(layout, count, total_iterations)
    per_stage = [layers] * layout.cols if isinstance(layers, int) else list(layers)
    return hierarchical_schedule(layout, per_stage, total_iterations)


def _train_block(task: tuple) -> BlockOutcome:
    block_id, intensity, norm, layers, total_iterations, flat, config_data = task
    outcome = BlockOutcome(block_id=block_id, norm=norm)
    if norm == 0:
        logger.info("block %d is blank, skipped", block_id)
        return outcome
    try:
        config = TrainConfig.model_validate(config_data).model_copy(update={"seed": config_data["seed"] + block_id})
        block = GrayImage(intensity)
        layout = GridLayout.from_shape(block.height, block.width)
        schedule = block_schedule(layout, layers, total_iterations, flat)
        result = hierarchical_train(block, layout, schedule, config)
        outcome.document = result.circuit.to_document(result.params)
        outcome.tvd = result.final.tvd_full
    except Exception as exc:
        logger.error("block %d failed: %s", block_id, exc)
        outcome.error = f"{type(exc).__name__}: {exc}"
    return outcome


def train_bae(
    image: GrayImage,
    b: int,
    layers: Union[int, Sequence[int]],
    total_iterations: int,
    config: TrainConfig,
    parallel: int = 1,
    grid: Optional[Tuple[int, int]] = None,
    flat: bool = False,
) -> BaeResult:
    """
    Partition into tiles and train one hierarchical model per tile.

    Block seeds are config.seed + block_id, so results do not depend on the
    order or the process that trains them. A failing block is reported in
    its outcome and left black in the reconstruction.
    """
    decomposition = partition_blocks(image, b, grid)
    qubits = decomposition.qubits_per_block()
    tasks = [
        (block_id, block.intensity, norm, layers, total_iterations, flat, config.model_dump())
        for block_id, (block, norm) in enumerate(zip(decomposition.blocks, decomposition.norms))
    ]
    logger.info("training %d blocks of %d qubits with %d worker(s)", len(tasks), qubits, parallel)
    if parallel > 1 and len(tasks) > 1:
        with mp.Pool(processes=min(parallel, len(tasks))) as pool:
            outcomes = pool.map(_train_block, tasks)
    else:
        outcomes = [_train_block(task) for task in tasks]
    outcomes.sort(key=lambda outcome: outcome.block_id)

    distributions: List[Optional[ProbabilityVector]] = []
    for outcome in outcomes:
        if outcome.document is None:
            distributions.append(None)
            continue
        circuit, params = outcome.model()
        distributions.append(born_distribution(run_circuit(circuit, params, config.max_qubits)))
    failures = [outcome.block_id for outcome in outcomes if outcome.error]
    intensity = assembled_intensity(decomposition, distributions, allow_missing=bool(failures))
    assembled = intensity_tvd(image.intensity, intensity) if intensity.sum() > 0 else 1.0
    logger.info("assembled %d blocks: TVD %.5f, %d failure(s)", len(outcomes), assembled, len(failures))
    return BaeResult(
        decomposition=decomposition,
        outcomes=outcomes,
        reconstruction=assemble_blocks(decomposition, distributions, allow_missing=bool(failures)),
        assembled_tvd=assembled,
        qubits_per_block=qubits,
        failures=failures,
    )
