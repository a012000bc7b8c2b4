"""
Circuit IR and the grid-structured hierarchical ansatz.

Qubits are labelled by significance: labels 0..j-1 are the row (vertical)
qubits v_1..v_j and labels j..n-1 the column (horizontal) qubits h_1..h_k.
They sit on a 2 x ceil(n/2) grid, h-qubits on the top row and v-qubits on
the bottom row, most significant on the left. A stage activates the
leftmost columns; the stage circuit is simulated on its active register only.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from qcbm_loader.models.errors import CircuitStructureError, ParameterCountError
from qcbm_loader.models.schemas import (
    BasisEnum,
    CircuitDocument,
    ExportFormatEnum,
    Gate,
    GateKindEnum,
    HierarchySchedule,
    StageSpec,
    TWO_QUBIT_KINDS,
)

logger = logging.getLogger(__name__)

QASM_HEADER_LINES = 3
MNIST_LAYERS = (1, 1, 2, 2, 2)
NAIVE_LOADING_LAYERS = (0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1)


@dataclass(frozen=True)
class GridLayout:
    num_v: int
    num_h: int

    def __post_init__(self):
        if self.num_v < 0 or self.num_h < 0 or self.num_v + self.num_h < 1:
            raise CircuitStructureError("layout needs at least one qubit")
        if abs(self.num_v - self.num_h) > 1:
            raise CircuitStructureError(
                f"vertical/horizontal qubit counts {self.num_v}/{self.num_h} differ by more than one"
            )

    @classmethod
    def from_shape(cls, height: int, width: int) -> "GridLayout":
        """Layout for a 2^j x 2^k image."""
        for size in (height, width):
            if size < 1 or size & (size - 1):
                raise CircuitStructureError(f"image side {size} is not a power of two")
        return cls(height.bit_length() - 1, width.bit_length() - 1)

    @property
    def num_qubits(self) -> int:
        return self.num_v + self.num_h

    @property
    def cols(self) -> int:
        return max(self.num_v, self.num_h)

    def v_qubit(self, i: int) -> int:
        return i

    def h_qubit(self, i: int) -> int:
        return self.num_v + i

    def leading_qubits(self) -> List[int]:
        """Most significant row and column qubits (whichever axes exist)."""
        return ([self.v_qubit(0)] if self.num_v else []) + ([self.h_qubit(0)] if self.num_h else [])

    def column_qubits(self, c: int) -> List[int]:
        qubits = []
        if c < self.num_v:
            qubits.append(self.v_qubit(c))
        if c < self.num_h:
            qubits.append(self.h_qubit(c))
        return qubits

    def active_qubits(self, columns: int) -> List[int]:
        if columns < 1 or columns > self.cols:
            raise CircuitStructureError(f"{columns} active columns on a grid of {self.cols}")
        return sorted(q for c in range(columns) for q in self.column_qubits(c))

    def active_counts(self, columns: int) -> Tuple[int, int]:
        """(v-qubits, h-qubits) active in the leftmost `columns` columns."""
        return min(columns, self.num_v), min(columns, self.num_h)

    def edges(self) -> List[Tuple[int, int]]:
        """Nearest-neighbour pairs, per column: vertical rung, top horizontal, bottom horizontal."""
        pairs = []
        for c in range(self.cols):
            if c < self.num_v and c < self.num_h:
                pairs.append((self.v_qubit(c), self.h_qubit(c)))
            if c + 1 < self.num_h:
                pairs.append((self.h_qubit(c), self.h_qubit(c + 1)))
            if c + 1 < self.num_v:
                pairs.append((self.v_qubit(c), self.v_qubit(c + 1)))
        return pairs

    def active_edges(self, columns: int) -> List[Tuple[int, int]]:
        active = set(self.active_qubits(columns))
        return [(a, b) for a, b in self.edges() if a in active and b in active]


@dataclass(frozen=True)
class ParameterizedCircuit:
    num_qubits: int
    gates: Tuple[Gate, ...]
    num_params: int
    register: Optional[Tuple[int, ...]] = None
    num_random: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.register is None:
            object.__setattr__(self, "register", tuple(range(self.num_qubits)))
        else:
            object.__setattr__(self, "register", tuple(self.register))
        register = self.register
        if not register or list(register) != sorted(set(register)):
            raise CircuitStructureError("register must be a non-empty sorted list of distinct labels")
        if register[-1] >= self.num_qubits:
            raise CircuitStructureError(f"register label {register[-1]} outside {self.num_qubits} qubits")
        members = set(register)
        referenced = set()
        for gate in self.gates:
            for qubit in gate.qubits:
                if qubit not in members:
                    raise CircuitStructureError(f"{gate.kind.value} touches qubit {qubit} outside the register")
            if gate.param is not None:
                if gate.param >= self.num_params:
                    raise CircuitStructureError(f"slot {gate.param} outside {self.num_params} parameters")
                referenced.add(gate.param)
        if len(referenced) != self.num_params:
            raise CircuitStructureError("every parameter slot must be referenced by a gate")
        if self.num_random > self.num_params:
            raise CircuitStructureError("more randomized slots than parameters")

    @cached_property
    def _local(self) -> Tuple[Gate, ...]:
        position = {label: i for i, label in enumerate(self.register)}
        return tuple(
            gate.model_copy(update={"qubits": tuple(position[q] for q in gate.qubits)})
            for gate in self.gates
        )

    def local_gates(self) -> Tuple[Gate, ...]:
        """Gates with qubit labels replaced by register positions."""
        return self._local

    def to_document(self, params: Sequence[float]) -> CircuitDocument:
        values = _bound(self, params)
        return CircuitDocument(
            num_qubits=self.num_qubits,
            register=list(self.register),
            num_params=self.num_params,
            num_random=self.num_random,
            gates=list(self.gates),
            params=[float(v) for v in values],
        )

    @classmethod
    def from_document(cls, document: CircuitDocument) -> Tuple["ParameterizedCircuit", np.ndarray]:
        circuit = cls(
            num_qubits=document.num_qubits,
            gates=tuple(document.gates),
            num_params=document.num_params,
            register=tuple(document.register),
            num_random=document.num_random,
        )
        return circuit, _bound(circuit, document.params)


def _bound(circuit: ParameterizedCircuit, params: Sequence[float]) -> np.ndarray:
    values = np.asarray(params, dtype=np.float64)
    if values.shape != (circuit.num_params,):
        raise ParameterCountError(f"circuit has {circuit.num_params} slots, got {values.shape}")
    return values


def _check_schedule(layout: GridLayout, schedule: HierarchySchedule) -> None:
    last = schedule.stages[-1].columns
    if last > layout.cols:
        raise CircuitStructureError(f"schedule activates {last} columns, layout has {layout.cols}")


def build_stage_circuit(layout: GridLayout, schedule: HierarchySchedule, stage: int) -> ParameterizedCircuit:
    """
    Circuit for `stage`: every earlier stage's gates (slots unchanged), then
    H on each newly activated qubit, then the stage's layers. Stage 0 also
    carries an initial RY/RZ layer whose slots are the randomized ones.
    """
    if stage < 0 or stage >= len(schedule.stages):
        raise CircuitStructureError(f"stage {stage} outside schedule of {len(schedule.stages)}")
    _check_schedule(layout, schedule)
    gates: List[Gate] = []
    slot = 0
    num_random = 0
    previous: List[int] = []
    active: List[int] = []
    for index in range(stage + 1):
        spec = schedule.stages[index]
        active = layout.active_qubits(spec.columns)
        if not active:
            raise CircuitStructureError(f"stage {index} has no active qubits")
        fresh = [q for q in active if q not in previous]
        gates.extend(Gate(kind=GateKindEnum.H, qubits=(q,)) for q in fresh)
        if index == 0:
            for q in active:
                gates.append(Gate(kind=GateKindEnum.RY, qubits=(q,), param=slot))
                gates.append(Gate(kind=GateKindEnum.RZ, qubits=(q,), param=slot + 1))
                slot += 2
            num_random = slot
        for _ in range(spec.layers):
            new_gates, slot = _layer(active, layout.active_edges(spec.columns), slot)
            gates.extend(new_gates)
        previous = active
    return ParameterizedCircuit(layout.num_qubits, tuple(gates), slot, tuple(active), num_random)


def _layer(active: Sequence[int], edges: Sequence[Tuple[int, int]], slot: int) -> Tuple[List[Gate], int]:
    gates = []
    for q in active:
        gates.append(Gate(kind=GateKindEnum.RY, qubits=(q,), param=slot))
        gates.append(Gate(kind=GateKindEnum.RZ, qubits=(q,), param=slot + 1))
        slot += 2
    for a, b in edges:
        gates.append(Gate(kind=GateKindEnum.RZZ, qubits=(a, b), param=slot))
        slot += 1
    return gates, slot


def append_layer(
    circuit: ParameterizedCircuit,
    layout: GridLayout,
    closing_rotation: bool = False,
) -> ParameterizedCircuit:
    """Extend a circuit with one more layer over its register (plus a final RY per qubit if asked)."""
    active = list(circuit.register)
    members = set(active)
    edges = [(a, b) for a, b in layout.edges() if a in members and b in members]
    gates, slot = _layer(active, edges, circuit.num_params)
    if closing_rotation:
        for q in active:
            gates.append(Gate(kind=GateKindEnum.RY, qubits=(q,), param=slot))
            slot += 1
    return ParameterizedCircuit(circuit.num_qubits, circuit.gates + tuple(gates), slot, circuit.register, circuit.num_random)


def initial_parameters(circuit: ParameterizedCircuit, seed: int) -> np.ndarray:
    """Uniform [0, 2pi) on the randomized leading slots, zero elsewhere."""
    params = np.zeros(circuit.num_params)
    rng = np.random.default_rng(seed)
    params[: circuit.num_random] = rng.uniform(0.0, 2.0 * math.pi, size=circuit.num_random)
    return params


def lift_parameters(
    prev_params: Sequence[float],
    prev: ParameterizedCircuit,
    next: ParameterizedCircuit,
) -> np.ndarray:
    """Copy trained values into the extended circuit; new slots start at exactly 0."""
    values = _bound(prev, prev_params)
    if (
        len(next.gates) < len(prev.gates)
        or next.gates[: len(prev.gates)] != prev.gates
        or next.num_params < prev.num_params
    ):
        raise CircuitStructureError("next circuit does not extend the previous one")
    lifted = np.zeros(next.num_params)
    lifted[: prev.num_params] = values
    return lifted


def count_two_qubit_gates(circuit: ParameterizedCircuit) -> int:
    return sum(1 for gate in circuit.gates if gate.kind in TWO_QUBIT_KINDS)


def count_single_qubit_gates(circuit: ParameterizedCircuit) -> int:
    return len(circuit.gates) - count_two_qubit_gates(circuit)


def compile_to_basis(circuit: ParameterizedCircuit, basis: Union[BasisEnum, str]) -> ParameterizedCircuit:
    """Rewrite for a device basis; CNOT-native turns RZZ(t) into CNOT . RZ(t) . CNOT."""
    try:
        basis = BasisEnum(basis)
    except ValueError:
        raise CircuitStructureError(f"unknown basis {basis!r}")
    if basis == BasisEnum.RZZ_NATIVE:
        return circuit
    gates: List[Gate] = []
    for gate in circuit.gates:
        if gate.kind != GateKindEnum.RZZ:
            gates.append(gate)
            continue
        a, b = gate.qubits
        gates.append(Gate(kind=GateKindEnum.CNOT, qubits=(a, b)))
        gates.append(Gate(kind=GateKindEnum.RZ, qubits=(b,), angle=gate.angle, param=gate.param))
        gates.append(Gate(kind=GateKindEnum.CNOT, qubits=(a, b)))
    return ParameterizedCircuit(circuit.num_qubits, tuple(gates), circuit.num_params, circuit.register, circuit.num_random)


_QASM_NAMES = {
    GateKindEnum.H: "h",
    GateKindEnum.X: "x",
    GateKindEnum.RY: "ry",
    GateKindEnum.RZ: "rz",
    GateKindEnum.RZZ: "rzz",
    GateKindEnum.CNOT: "cx",
}


def export_circuit(
    circuit: ParameterizedCircuit,
    params: Sequence[float],
    format: Union[ExportFormatEnum, str] = ExportFormatEnum.QASM2,
) -> str:
    try:
        format = ExportFormatEnum(format)
    except ValueError:
        raise CircuitStructureError(f"unsupported export format {format!r}")
    if format == ExportFormatEnum.JSON:
        return circuit.to_document(params).model_dump_json(indent=2)

    values = _bound(circuit, params)
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.num_qubits}];"]
    for gate in circuit.gates:
        operands = ",".join(f"q[{q}]" for q in gate.qubits)
        name = _QASM_NAMES[gate.kind]
        if gate.angle is not None or gate.param is not None:
            theta = gate.angle if gate.angle is not None else float(values[gate.param])
            lines.append(f"{name}({theta!r}) {operands};")
        else:
            lines.append(f"{name} {operands};")
    return "\n".join(lines) + "\n"


def import_circuit(text: str) -> Tuple[ParameterizedCircuit, np.ndarray]:
    """Inverse of the structured (JSON) export."""
    return ParameterizedCircuit.from_document(CircuitDocument.model_validate_json(text))


# Schedule helpers

def hierarchical_schedule(
    layout: GridLayout,
    layers: Sequence[int],
    total_iterations: int,
) -> HierarchySchedule:
    """One stage per grid column; iterations split in proportion to 2^{n_s}."""
    if len(layers) != layout.cols:
        raise CircuitStructureError(f"{len(layers)} layer counts for {layout.cols} columns")
    columns = list(range(1, layout.cols + 1))
    iterations = proportional_iterations(layout, columns, total_iterations)
    return HierarchySchedule(stages=[
        StageSpec(columns=c, layers=l, iterations=it) for c, l, it in zip(columns, layers, iterations)
    ])


def flat_schedule(layout: GridLayout, layers: int, iterations: int) -> HierarchySchedule:
    return HierarchySchedule(stages=[StageSpec(columns=layout.cols, layers=layers, iterations=iterations)])


def proportional_iterations(layout: GridLayout, columns: Sequence[int], total: int) -> List[int]:
    """Split `total` exactly: one step per stage, the rest in proportion to 2^{n_s}."""
    if total < len(columns):
        raise ValueError(f"{total} iterations cannot cover {len(columns)} stages")
    weights = [float(1 << len(layout.active_qubits(c))) for c in columns]
    spare = total - len(columns)
    split = [1 + int(w * spare / sum(weights)) for w in weights]
    split[-1] += total - sum(split)
    return split


def count_parameters(layout: GridLayout, schedule: HierarchySchedule) -> int:
    return build_stage_circuit(layout, schedule, len(schedule.stages) - 1).num_params


def _params_for(layout: GridLayout, layers: Sequence[int]) -> int:
    active0 = len(layout.active_qubits(1))
    total = 2 * active0
    for c, count in enumerate(layers, start=1):
        per_layer = 2 * len(layout.active_qubits(c)) + len(layout.active_edges(c))
        total += count * per_layer
    return total


def layers_for_budget(layout: GridLayout, budget: int, flat: bool = False) -> List[int]:
    """
    Layer counts whose parameter total stays within `budget`.

    Hierarchical: every stage gets one layer, then layers are added
    round-robin from the last stage backwards while they fit. Flat: the
    single stage gets the most layers that fit (at least one).
    """
    if flat:
        n = layout.num_qubits
        per_layer = 2 * n + len(layout.edges())
        return [max(1, (budget - 2 * n) // per_layer)]
    layers = [1] * layout.cols
    if _params_for(layout, layers) > budget:
        logger.warning("budget %d below the one-layer-per-stage minimum", budget)
        return layers
    grew = True
    while grew:
        grew = False
        for stage in reversed(range(layout.cols)):
            layers[stage] += 1
            if _params_for(layout, layers) <= budget:
                grew = True
            else:
                layers[stage] -= 1
    return layers


def mnist_schedule(layout: GridLayout, total_iterations: int) -> HierarchySchedule:
    """2x5 grid schedule with exactly 65 RZZ gates."""
    if layout.cols != len(MNIST_LAYERS) or layout.num_qubits != 10:
        raise CircuitStructureError("MNIST schedule needs a 10-qubit 2x5 layout")
    return hierarchical_schedule(layout, MNIST_LAYERS, total_iterations)


def naive_loading_schedule(layout: GridLayout, total_iterations: int) -> HierarchySchedule:
    """21-qubit reference schedule: 40 RZZ gates, i.e. 80 CNOTs after compilation."""
    if layout.cols != len(NAIVE_LOADING_LAYERS) or layout.num_qubits != 21:
        raise CircuitStructureError("naive-loading schedule needs a 21-qubit layout")
    return hierarchical_schedule(layout, NAIVE_LOADING_LAYERS, total_iterations)
