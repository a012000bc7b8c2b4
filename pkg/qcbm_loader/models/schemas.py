from pydantic import BaseModel, Field, model_validator, field_validator
from typing import List, Optional, Tuple
from enum import Enum


class GateKindEnum(str, Enum):
    H = "H"
    X = "X"
    RY = "RY"
    RZ = "RZ"
    RZZ = "RZZ"
    CNOT = "CNOT"


PARAMETERIZED_KINDS = frozenset({GateKindEnum.RY, GateKindEnum.RZ, GateKindEnum.RZZ})
TWO_QUBIT_KINDS = frozenset({GateKindEnum.RZZ, GateKindEnum.CNOT})


class BasisEnum(str, Enum):
    RZZ_NATIVE = "rzz"
    CNOT_NATIVE = "cnot"


class ExportFormatEnum(str, Enum):
    QASM2 = "qasm2"
    JSON = "json"


class Gate(BaseModel):
    """
    One gate of a circuit. Rotations carry either a fixed angle or a
    parameter slot; H, X and CNOT carry neither.
    """
    kind: GateKindEnum = Field(..., description="Gate type")
    qubits: Tuple[int, ...] = Field(..., description="Qubit labels acted on (control first for CNOT)")
    angle: Optional[float] = Field(default=None, description="Fixed angle in radians")
    param: Optional[int] = Field(default=None, description="Parameter slot index")

    class Config:
        frozen = True
        json_schema_extra = {
            "example": {"kind": "RZZ", "qubits": [0, 3], "angle": None, "param": 7}
        }

    @model_validator(mode="after")
    def check_shape(self) -> "Gate":
        arity = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind.value} acts on {arity} qubit(s), got {len(self.qubits)}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit labels must be non-negative")
        if arity == 2 and self.qubits[0] == self.qubits[1]:
            raise ValueError("two-qubit gate needs distinct qubits")
        if self.kind in PARAMETERIZED_KINDS:
            if (self.angle is None) == (self.param is None):
                raise ValueError(f"{self.kind.value} needs exactly one of angle / param")
        elif self.angle is not None or self.param is not None:
            raise ValueError(f"{self.kind.value} takes no angle")
        if self.param is not None and self.param < 0:
            raise ValueError("parameter slot must be non-negative")
        return self


class TrainConfig(BaseModel):
    learning_rate: float = Field(default=0.01, gt=0, description="Adam learning rate")
    iterations: int = Field(default=100, ge=1, description="Adam steps per stage when no schedule gives them")
    seed: int = Field(default=0, ge=0, description="Seed for first-layer randomization")
    kl_epsilon: float = Field(default=1e-12, gt=0, description="Lower clamp on model probabilities in KL")
    adam_beta1: float = Field(default=0.9, ge=0, lt=1, description="Adam first-moment decay")
    adam_beta2: float = Field(default=0.999, ge=0, lt=1, description="Adam second-moment decay")
    adam_epsilon: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
    log_every: int = Field(default=50, ge=1, description="Iterations between debug log lines")
    max_qubits: int = Field(default=24, ge=1, description="Largest register the simulator will allocate")
    readout_threshold: float = Field(default=0.4, gt=0, le=1, description="Target |<Z>| for readout learning")
    readout_iterations: int = Field(default=300, ge=1, description="Iteration cap for readout learning")
    readout_learning_rate: float = Field(default=0.05, gt=0, description="Adam rate for readout learning")


class StageSpec(BaseModel):
    columns: int = Field(..., ge=1, description="Active grid columns (leftmost first)")
    layers: int = Field(default=1, ge=0, description="Variational layers added by this stage")
    iterations: int = Field(default=100, ge=1, description="Adam steps for this stage")


class HierarchySchedule(BaseModel):
    stages: List[StageSpec] = Field(..., min_length=1, description="Ordered training stages")

    class Config:
        json_schema_extra = {
            "example": {
                "stages": [
                    {"columns": 1, "layers": 1, "iterations": 50},
                    {"columns": 2, "layers": 1, "iterations": 100},
                ]
            }
        }

    @field_validator("stages")
    @classmethod
    def check_monotone(cls, stages: List[StageSpec]) -> List[StageSpec]:
        # a single stage is the flat ansatz; otherwise grow one column at a time from the left
        if len(stages) > 1 and stages[0].columns != 1:
            raise ValueError("a multi-stage schedule must start with one active column")
        for prev, nxt in zip(stages, stages[1:]):
            if nxt.columns <= prev.columns:
                raise ValueError("stage column counts must be strictly increasing")
            if nxt.columns != prev.columns + 1:
                raise ValueError(f"stage with {nxt.columns} columns follows {prev.columns}: each stage adds exactly one column")
        return stages

    @property
    def total_iterations(self) -> int:
        return sum(stage.iterations for stage in self.stages)


class StageReport(BaseModel):
    stage: int = Field(..., description="Stage index (0-based)")
    active_qubits: int = Field(..., description="Qubits active in this stage (n_s)")
    num_params: int = Field(..., description="Parameter slots of the stage circuit")
    two_qubit_gates: int = Field(..., description="RZZ/CNOT count of the stage circuit")
    kl: float = Field(..., description="Final KL at stage resolution (KL_{n_s})")
    tvd_full: float = Field(..., ge=0, le=1, description="TVD at full image resolution")
    fidelity_full: float = Field(..., ge=0, le=1, description="Classical fidelity at full resolution")
    loss_trace: List[float] = Field(default_factory=list, description="KL per iteration, entry 0 before updates")
    tvd_trace: List[float] = Field(default_factory=list, description="TVD_full per iteration")
    wall_time: float = Field(..., ge=0, description="Seconds spent in this stage")


class MarginalSet(BaseModel):
    subset: List[int] = Field(..., description="Qubit subset S (0-based)")
    estimates: List[float] = Field(..., description="Measured / estimated P_i per qubit in S")
    ideal: Optional[List[float]] = Field(default=None, description="Ideal P*_i per qubit in S")

    @model_validator(mode="after")
    def check_values(self) -> "MarginalSet":
        if len(self.subset) != len(self.estimates) or (self.ideal is not None and len(self.ideal) != len(self.subset)):
            raise ValueError("subset, estimates and ideal must have equal length")
        for value in list(self.estimates) + list(self.ideal or []):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"marginal {value} outside [0, 1]")
        return self


class CircuitDocument(BaseModel):
    """Canonical persistence form of a circuit with bound parameters"""
    num_qubits: int = Field(..., ge=1, description="Width of the labelled register")
    register: List[int] = Field(..., description="Simulated qubit labels, sorted")
    num_params: int = Field(..., ge=0, description="Number of parameter slots")
    num_random: int = Field(default=0, ge=0, description="Leading slots randomized at initialization")
    gates: List[Gate] = Field(default_factory=list, description="Ordered gate list")
    params: List[float] = Field(default_factory=list, description="Bound parameter values")


class Checkpoint(BaseModel):
    circuit: CircuitDocument = Field(..., description="Trained circuit and parameters")
    num_v: int = Field(..., ge=0, description="Vertical (row) qubits")
    num_h: int = Field(..., ge=0, description="Horizontal (column) qubits")
    image_height: int = Field(..., ge=1, description="Height of the encoded (padded) image")
    image_width: int = Field(..., ge=1, description="Width of the encoded (padded) image")
    norm_constant: float = Field(..., ge=0, description="Sum of intensities of the encoded image")
    downsample: int = Field(default=1, ge=1, description="Pooling factor applied to the source image before encoding")
    mode: str = Field(default="hierarchical", description="hierarchical | flat | bae-block")


class MetricsSummary(BaseModel):
    mode: str = Field(..., description="hierarchical | flat | bae")
    num_qubits: int = Field(..., description="Qubits of the full register")
    num_params: int = Field(..., description="Trainable parameters")
    two_qubit_gates: int = Field(..., description="RZZ + CNOT count")
    single_qubit_gates: int = Field(default=0, description="RY, RZ, H and X count")
    kl: float = Field(..., description="KL at full resolution")
    tvd: float = Field(..., description="TVD at full resolution")
    fidelity: float = Field(..., description="Classical fidelity at full resolution")


class BlockRecord(BaseModel):
    block_id: int = Field(..., ge=0, description="Row-major tile index")
    row: int = Field(..., ge=0, description="Tile row in the block grid")
    col: int = Field(..., ge=0, description="Tile column in the block grid")
    top: int = Field(..., ge=0, description="Pixel row of the tile's top edge")
    left: int = Field(..., ge=0, description="Pixel column of the tile's left edge")
    size: int = Field(..., ge=1, description="Tile side length in pixels")
    qubits: int = Field(..., ge=0, description="Qubits needed for the tile")
    norm: float = Field(..., ge=0, description="Sum of the tile's intensities")
    num_params: int = Field(default=0, ge=0, description="Trained parameter count")
    tvd: Optional[float] = Field(default=None, description="Per-block TVD after training")
    error: Optional[str] = Field(default=None, description="Failure message if training failed")


class BlockManifest(BaseModel):
    b: int = Field(..., ge=0, description="Block parameter (0 = whole image)")
    grid_rows: int = Field(..., ge=1, description="Tile rows")
    grid_cols: int = Field(..., ge=1, description="Tile columns")
    image_height: int = Field(..., ge=1)
    image_width: int = Field(..., ge=1)
    blocks: List[BlockRecord] = Field(default_factory=list)

    class Config:
        json_schema_extra = {
            "example": {
                "b": 2, "grid_rows": 2, "grid_cols": 4, "image_height": 64, "image_width": 128,
                "blocks": [{"block_id": 0, "row": 0, "col": 0, "top": 0, "left": 0,
                            "size": 32, "qubits": 10, "norm": 12.5}]
            }
        }


class BaeSummaryRow(BaseModel):
    blocks: int = Field(..., serialization_alias="#blocks")
    qubits_per_block: int = Field(..., serialization_alias="qubits/block")
    total_qubits: int = Field(..., serialization_alias="total qubits")
    total_params: int = Field(..., serialization_alias="total params")
    tvd: float = Field(..., serialization_alias="TVD")


class RunConfig(BaseModel):
    input: Optional[str] = Field(default=None, description="Input PGM image path")
    layers: Optional[List[int]] = Field(default=None, description="Layers per stage (one entry per grid column)")
    total_iterations: Optional[int] = Field(default=None, ge=1, description="Iterations summed over all stages (optimizer.iterations per stage when unset)")
    parameter_budget: Optional[int] = Field(default=None, ge=1, description="Target parameter count when layers are not given")
    blocks: int = Field(default=0, ge=0, description="BAE block parameter b (0 = single block)")
    flat: bool = Field(default=False, description="Train the full circuit without hierarchy")
    parallel: int = Field(default=1, ge=1, description="Worker processes for BAE blocks")
    grid: Optional[List[int]] = Field(default=None, description="Explicit BAE tile grid rows,cols (default b x 2b)")
    downsample: int = Field(default=1, ge=1, description="Power-of-two pooling factor applied before encoding")
    optimizer: TrainConfig = Field(default_factory=TrainConfig, description="Optimizer settings")
    shots: int = Field(default=10000, ge=1, description="Default shot count for sampling and analysis")
    output_dir: str = Field(default="runs/latest", description="Directory receiving all artifacts")

    @field_validator("layers")
    @classmethod
    def check_layers(cls, layers: Optional[List[int]]) -> Optional[List[int]]:
        if layers is not None:
            if not layers:
                raise ValueError("layers must not be empty")
            if any(layer < 0 for layer in layers):
                raise ValueError("layer counts must be non-negative")
        return layers

    @field_validator("grid")
    @classmethod
    def check_grid(cls, grid: Optional[List[int]]) -> Optional[List[int]]:
        if grid is not None and (len(grid) != 2 or min(grid) < 1):
            raise ValueError("grid must be two positive integers rows,cols")
        return grid

    @field_validator("downsample")
    @classmethod
    def check_downsample(cls, factor: int) -> int:
        if factor & (factor - 1):
            raise ValueError("downsample must be a power of two")
        return factor
