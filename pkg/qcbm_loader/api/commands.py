"""
Command-line verbs: train, train-bae, metrics, sample, analyze, export.

Exit codes: 0 success, 1 usage or configuration error, 2 compute error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import ValidationError

from qcbm_loader.models.errors import (
    BlockPartitionError,
    CapacityError,
    ConfigError,
    QcbmError,
    QubitIndexError,
)
from qcbm_loader.models.schemas import (
    BaeSummaryRow,
    BasisEnum,
    Checkpoint,
    ExportFormatEnum,
    MarginalSet,
    MetricsSummary,
    RunConfig,
    TrainConfig,
)
from qcbm_loader.modules.configManager import validate_xml_config, xml_to_dict
from qcbm_loader.services.analysis import (
    ReadoutResult,
    depolarized_reference,
    empirical_marginals,
    exact_marginals,
    finite_shot_percentile,
    l1_marginals,
    mixed_baseline_l1,
    sample_shots,
    train_readout,
)
from qcbm_loader.services.circuit import (
    GridLayout,
    ParameterizedCircuit,
    compile_to_basis,
    count_two_qubit_gates,
    export_circuit,
    hierarchical_schedule,
    layers_for_budget,
)
from qcbm_loader.services.distribution import ProbabilityVector, tvd
from qcbm_loader.services.image_io import (
    GrayImage,
    distribution_to_image,
    downsample,
    image_to_distribution,
    load_image,
    pad_to_pow2,
    partition_blocks,
    save_image,
)
from qcbm_loader.services.plotting import plot_l1_vs_gates, plot_marginals
from qcbm_loader.services.processing import ReportService
from qcbm_loader.services.session import ArtifactSession
from qcbm_loader.services.statevector import born_distribution, run_circuit
from qcbm_loader.services.training import hierarchical_train, train_bae, train_flat

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2

USAGE_ERRORS = (ConfigError, ValidationError, FileNotFoundError, BlockPartitionError, QubitIndexError)

report_service = ReportService()


class CommandError(Exception):
    """
    Raised by a command to end with a specific exit code
    """

    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CommandError(EXIT_USAGE, message)


# Configuration

def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.replace("x", ",").split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# (dest, flag, type, RunConfig key, TrainConfig key or None, help)
RUN_OPTIONS: List[Tuple[str, str, Any, str, Optional[str], str]] = [
    ("input", "--input", str, "input", None, "input PGM image"),
    ("output_dir", "--output-dir", str, "output_dir", None, "directory receiving all artifacts"),
    ("layers", "--layers", _int_list, "layers", None, "layers per stage, comma separated, one per grid column"),
    ("total_iterations", "--total-iterations", int, "total_iterations", None, "Adam steps summed over all stages; --iterations per stage when unset"),
    ("iterations", "--iterations", int, "optimizer", "iterations", "Adam steps per stage when --total-iterations is unset"),
    ("parameter_budget", "--parameter-budget", int, "parameter_budget", None, "target parameter count when --layers is absent"),
    ("blocks", "--blocks", int, "blocks", None, "BAE block parameter b (image split into b x 2b tiles)"),
    ("grid", "--grid", _int_list, "grid", None, "explicit BAE tile grid ROWSxCOLS"),
    ("parallel", "--parallel", int, "parallel", None, "worker processes for BAE blocks"),
    ("downsample", "--downsample", int, "downsample", None, "power-of-two pooling applied to the image first"),
    ("learning_rate", "--learning-rate", float, "optimizer", "learning_rate", "Adam learning rate"),
    ("seed", "--seed", int, "optimizer", "seed", "seed for the randomized initial layer"),
    ("kl_epsilon", "--kl-epsilon", float, "optimizer", "kl_epsilon", "clamp on model probabilities in KL"),
    ("adam_beta1", "--adam-beta1", float, "optimizer", "adam_beta1", "Adam first-moment decay"),
    ("adam_beta2", "--adam-beta2", float, "optimizer", "adam_beta2", "Adam second-moment decay"),
    ("adam_epsilon", "--adam-epsilon", float, "optimizer", "adam_epsilon", "Adam denominator offset"),
    ("log_every", "--log-every", int, "optimizer", "log_every", "iterations between debug log lines"),
    ("max_qubits", "--max-qubits", int, "optimizer", "max_qubits", "largest register the simulator allocates"),
]

# Options of analyze that map onto TrainConfig readout settings
READOUT_OPTIONS: List[Tuple[str, str, Any, str]] = [
    ("readout_threshold", "--readout-threshold", float, "target |<Z>| of readout learning"),
    ("readout_iterations", "--readout-iterations", int, "iteration cap of readout learning"),
    ("readout_learning_rate", "--readout-learning-rate", float, "Adam rate of readout learning"),
]


def _default_of(key: str, sub_key: Optional[str]) -> Any:
    if sub_key:
        return TrainConfig.model_fields[sub_key].default
    return RunConfig.model_fields[key].default


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=argparse.SUPPRESS,
                        help="XML run configuration; flags override its values (default: none)")
    for dest, flag, kind, key, sub_key, text in RUN_OPTIONS:
        default = _default_of(key, sub_key)
        parser.add_argument(flag, dest=dest, type=kind, default=argparse.SUPPRESS,
                            help=f"{text} (default: {default})")
    parser.add_argument("--flat", dest="flat", action="store_true", default=argparse.SUPPRESS,
                        help="train the full circuit at once instead of stage by stage (default: False)")


def _load_config_file(path) -> RunConfig:
    report = validate_xml_config(path)
    for warning in report["warnings"]:
        logger.warning("%s: %s", path, warning)
    # a missing <input> is fine here, --input may supply it
    return xml_to_dict(path)


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """
    File values first, then every flag given on the command line

    Args:
        args: Parsed namespace (unset options are absent)

    Returns:
        Validated RunConfig
    """
    given = vars(args)
    config = _load_config_file(given["config"]) if "config" in given else RunConfig()
    data = config.model_dump()
    for dest, _, _, key, sub_key, _ in RUN_OPTIONS:
        if dest not in given:
            continue
        if sub_key:
            data["optimizer"][sub_key] = given[dest]
        else:
            data[key] = given[dest]
    if "flat" in given:
        data["flat"] = True
    return RunConfig.model_validate(data)


def _require_input(config: RunConfig) -> Path:
    if not config.input:
        raise ConfigError("no input image: pass --input or set <input> in the configuration")
    path = Path(config.input)
    if not path.exists():
        raise FileNotFoundError(f"input image {path} not found")
    return path


def prepare_image(path, factor: int, pad: bool = True) -> GrayImage:
    image = load_image(path)
    if factor > 1:
        image = downsample(image, factor)
    return pad_to_pow2(image) if pad else image


def resolve_layers(config: RunConfig, layout: GridLayout) -> List[int]:
    """Layer counts per stage (a single entry for flat training)"""
    if config.layers:
        if config.flat:
            return [sum(config.layers)]
        if len(config.layers) != layout.cols:
            raise ConfigError(f"{len(config.layers)} layer counts given, the layout has {layout.cols} columns")
        return list(config.layers)
    if config.parameter_budget:
        return layers_for_budget(layout, config.parameter_budget, flat=config.flat)
    return [1] if config.flat else [1] * layout.cols


def resolve_total_iterations(config: RunConfig, stages: int) -> int:
    if config.total_iterations is not None:
        return config.total_iterations
    return config.optimizer.iterations * stages


def load_checkpoint(path) -> Tuple[Checkpoint, ParameterizedCircuit, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} not found")
    checkpoint = Checkpoint.model_validate_json(path.read_text(encoding="utf-8"))
    circuit, params = ParameterizedCircuit.from_document(checkpoint.circuit)
    return checkpoint, circuit, params


def _model_distribution(circuit: ParameterizedCircuit, params, max_qubits: int) -> ProbabilityVector:
    return born_distribution(run_circuit(circuit, params, max_qubits))


# Commands

def cmd_train(config: RunConfig) -> MetricsSummary:
    """
    Train one model on the whole image and write its artifacts

    Args:
        config: Validated run configuration

    Returns:
        MetricsSummary at full resolution
    """
    image = prepare_image(_require_input(config), config.downsample)
    layout = GridLayout.from_shape(*image.shape)
    if layout.num_qubits > config.optimizer.max_qubits:
        raise CapacityError(f"{layout.num_qubits} qubits exceed the cap of {config.optimizer.max_qubits}")
    layers = resolve_layers(config, layout)
    session = ArtifactSession(config.output_dir)
    mode = "flat" if config.flat else "hierarchical"
    logger.info("%s training on %dx%d image, %d qubits, layers %s", mode, image.height, image.width, layout.num_qubits, layers)

    total_iterations = resolve_total_iterations(config, len(layers))
    if config.flat:
        result = train_flat(image, layout, layers[0], total_iterations, config.optimizer)
    else:
        schedule = hierarchical_schedule(layout, layers, total_iterations)
        result = hierarchical_train(image, layout, schedule, config.optimizer)

    target = image_to_distribution(image)
    model = result.distribution(config.optimizer)
    summary = report_service.metrics_summary(mode, result.circuit, target, model)
    checkpoint = Checkpoint(
        circuit=result.circuit.to_document(result.params),
        num_v=layout.num_v,
        num_h=layout.num_h,
        image_height=image.height,
        image_width=image.width,
        norm_constant=result.norm_constant,
        downsample=config.downsample,
        mode=mode,
    )
    session.write_json("checkpoint.json", checkpoint)
    session.write_json("params.json", [float(value) for value in result.params])
    session.write_frame("loss_trace.csv", report_service.loss_frame(result.reports))
    session.write_json("stages.json", [report.model_dump() for report in result.reports])
    reconstruction = distribution_to_image(model, image.shape, result.norm_constant)
    session.record("reconstruction.pgm", save_image(reconstruction, session.path("reconstruction.pgm")))
    session.write_json("metrics.json", summary)
    logger.info("artifacts: %s", session.artifacts())
    return summary


def cmd_train_bae(config: RunConfig) -> BaeSummaryRow:
    """
    Block-amplitude encoding: one model per tile, assembled afterwards

    Args:
        config: Validated run configuration (blocks / grid set the tiling)

    Returns:
        Summary row with #blocks, qubits/block, total qubits, total params, TVD
    """
    grid = tuple(config.grid) if config.grid else None
    pad = config.blocks == 0 and grid is None
    image = prepare_image(_require_input(config), config.downsample, pad=pad)
    decomposition = partition_blocks(image, config.blocks, grid)
    th, tw = decomposition.tile_shape
    try:
        block_layout = GridLayout.from_shape(th, tw)
    except QcbmError as exc:
        raise BlockPartitionError(f"tiles of {th}x{tw}: {exc}")
    if block_layout.num_qubits > config.optimizer.max_qubits:
        raise CapacityError(f"{block_layout.num_qubits} qubits per block exceed the cap of {config.optimizer.max_qubits}")
    layers = resolve_layers(config, block_layout)
    session = ArtifactSession(config.output_dir)

    result = train_bae(
        image,
        config.blocks,
        layers[0] if config.flat else layers,
        resolve_total_iterations(config, len(layers)),
        config.optimizer,
        parallel=config.parallel,
        grid=grid,
        flat=config.flat,
    )

    manifest = decomposition.manifest(
        num_params=[outcome.num_params for outcome in result.outcomes],
        tvds=[outcome.tvd for outcome in result.outcomes],
        errors=[outcome.error for outcome in result.outcomes],
    )
    for outcome, record in zip(result.outcomes, manifest.blocks):
        block_session = session.child(f"block_{outcome.block_id:03d}")
        block_session.write_json("block.json", record)
        if outcome.document is not None:
            block_session.write_json("checkpoint.json", Checkpoint(
                circuit=outcome.document,
                num_v=block_layout.num_v,
                num_h=block_layout.num_h,
                image_height=th,
                image_width=tw,
                norm_constant=outcome.norm,
                downsample=config.downsample,
                mode="bae-block",
            ))
    session.write_json("manifest.json", manifest)
    session.record("reconstruction.pgm", save_image(result.reconstruction, session.path("reconstruction.pgm")))
    row = report_service.bae_summary_row(result)
    session.write_frame("summary.csv", report_service.summary_frame([row]))
    session.write_json("metrics.json", row)
    if result.failures:
        logger.warning("blocks %s failed, see manifest.json", result.failures)
    logger.info("artifacts: %s", session.artifacts())
    return row


def cmd_metrics(checkpoint_path, image_path, resolutions: Optional[Sequence[int]] = None,
                max_qubits: int = TrainConfig().max_qubits) -> List[Dict[str, float]]:
    """KL_m, TVD_m and F_m of a checkpoint against an image, one row per m"""
    checkpoint, circuit, params = load_checkpoint(checkpoint_path)
    image = prepare_image(image_path, checkpoint.downsample)
    if image.shape != (checkpoint.image_height, checkpoint.image_width):
        raise ConfigError(
            f"image is {image.height}x{image.width}, checkpoint was trained on "
            f"{checkpoint.image_height}x{checkpoint.image_width}"
        )
    target = image_to_distribution(image)
    model = _model_distribution(circuit, params, max_qubits)
    for m in resolutions or [target.num_qubits]:
        if m < 1:
            raise ConfigError(f"resolution {m} must be at least 1")
    return report_service.resolution_rows(target, model, resolutions or [target.num_qubits])


def cmd_sample(checkpoint_path, shots: int, seed: int, output_dir,
               max_qubits: int = TrainConfig().max_qubits) -> Dict[str, Any]:
    """Sample shots from a checkpoint; writes counts.csv and the empirical image"""
    if shots < 1:
        raise CommandError(EXIT_USAGE, f"shots must be at least 1, got {shots}")
    checkpoint, circuit, params = load_checkpoint(checkpoint_path)
    model = _model_distribution(circuit, params, max_qubits)
    counts = sample_shots(model, shots, seed)
    empirical = counts.to_distribution()
    session = ArtifactSession(output_dir)
    session.write_frame("counts.csv", report_service.counts_frame(counts))
    image = distribution_to_image(empirical, (checkpoint.image_height, checkpoint.image_width), checkpoint.norm_constant)
    session.record("empirical.pgm", save_image(image, session.path("empirical.pgm")))
    return {"shots": shots, "outcomes": len(counts.counts), "tvd": tvd(model, empirical, model.num_qubits)}


def cmd_analyze(
    checkpoint_paths: Sequence[str],
    subset: Sequence[int],
    shots: int,
    trials: int,
    percentile: float,
    seed: int,
    output_dir,
    counts_paths: Optional[Sequence[str]] = None,
    exact: bool = False,
    max_qubits: int = TrainConfig().max_qubits,
    readout: Optional[TrainConfig] = None,
) -> pd.DataFrame:
    """
    Compare marginals P_i with the ideal P*_i for one or more checkpoints.

    P comes from measured counts files when given, otherwise from noiseless
    sampling of the model (or its exact marginals with `exact`). Rows are
    ordered by two-qubit gate count and followed by a depolarized reference.
    With `readout`, readout-observable learning runs on every leading qubit
    of each checkpoint and its outcome and <Z> traces are written as well.
    """
    if counts_paths and len(counts_paths) != len(checkpoint_paths):
        raise ConfigError("give one counts file per checkpoint")
    if shots < 1:
        raise CommandError(EXIT_USAGE, f"shots must be at least 1, got {shots}")
    session = ArtifactSession(output_dir)
    rows: List[Dict[str, Any]] = []
    panels: List[MarginalSet] = []
    labels: List[str] = []
    frames = []
    readouts: List[Tuple[str, int, ReadoutResult]] = []
    reference_ideal: Optional[List[float]] = None
    for position, path in enumerate(checkpoint_paths):
        checkpoint, circuit, params = load_checkpoint(path)
        model = _model_distribution(circuit, params, max_qubits)
        ideal = exact_marginals(model, subset)
        if reference_ideal is None:
            reference_ideal = ideal
        if counts_paths:
            counts = report_service.counts_from_frame(pd.read_csv(counts_paths[position]), model.num_qubits)
            marginals = empirical_marginals(counts, subset, ideal)
        elif exact:
            marginals = MarginalSet(subset=list(subset), estimates=ideal, ideal=ideal)
        else:
            marginals = empirical_marginals(sample_shots(model, shots, seed + position), subset, ideal)
        label = Path(path).parent.name or Path(path).stem
        panels.append(marginals)
        labels.append(label)
        frames.append(report_service.marginal_frame(label, marginals))
        rows.append({
            "checkpoint": label,
            "two_qubit_gates": count_two_qubit_gates(circuit),
            "l1": l1_marginals(marginals.estimates, ideal, subset),
            "mixed_baseline": mixed_baseline_l1(ideal, subset),
            "finite_shot_percentile": finite_shot_percentile(ideal, subset, shots, trials, percentile, seed),
        })
        if readout is not None:
            layout = GridLayout(checkpoint.num_v, checkpoint.num_h)
            for qubit in layout.leading_qubits():
                result = train_readout(circuit, params, qubit, layout, readout)
                logger.info("%s readout on qubit %d: <Z> %.4f -> %.4f in %d iterations",
                            label, qubit, result.initial_value, result.value, result.iterations)
                readouts.append((label, qubit, result))

    reference = depolarized_reference(reference_ideal, subset)
    frames.append(report_service.marginal_frame("depolarized", reference))
    table = report_service.analysis_frame(rows)
    baseline = mixed_baseline_l1(reference_ideal, subset)
    reference_row = pd.DataFrame([{
        "checkpoint": "depolarized",
        "two_qubit_gates": None,
        "l1": l1_marginals(reference.estimates, reference_ideal, subset),
        "mixed_baseline": baseline,
        "finite_shot_percentile": rows[0]["finite_shot_percentile"],
    }])
    table = pd.concat([table, reference_row], ignore_index=True)
    session.write_frame("analysis.csv", table)
    session.write_frame("marginals.csv", pd.concat(frames, ignore_index=True))
    if readout is not None:
        summary, trace = report_service.readout_frames(readouts)
        session.write_frame("readout.csv", summary)
        session.write_frame("readout_trace.csv", trace)
    session.record("marginals.png", plot_marginals(panels, labels, session.path("marginals.png"), reference))
    session.record("l1_vs_gates.png", plot_l1_vs_gates(
        [row["two_qubit_gates"] for row in rows],
        [row["l1"] for row in rows],
        session.path("l1_vs_gates.png"),
        baseline=baseline,
        percentile=rows[0]["finite_shot_percentile"],
    ))
    return table


def cmd_export(checkpoint_path, format: str = ExportFormatEnum.QASM2.value, basis: str = BasisEnum.RZZ_NATIVE.value) -> str:
    """Circuit text of a checkpoint, optionally compiled to a CNOT basis first"""
    _, circuit, params = load_checkpoint(checkpoint_path)
    return export_circuit(compile_to_basis(circuit, basis), params, format)


# Argument handling

def _handle_train(args) -> int:
    summary = cmd_train(load_run_config(args))
    print(f"mode={summary.mode} qubits={summary.num_qubits} params={summary.num_params} "
          f"two_qubit_gates={summary.two_qubit_gates} single_qubit_gates={summary.single_qubit_gates} KL={summary.kl:.6g} TVD={summary.tvd:.6g} F={summary.fidelity:.6g}")
    return EXIT_OK


def _handle_train_bae(args) -> int:
    row = cmd_train_bae(load_run_config(args))
    print(report_service.summary_frame([row]).to_string(index=False))
    return EXIT_OK


def _handle_metrics(args) -> int:
    rows = cmd_metrics(args.checkpoint, args.image, args.resolution, args.max_qubits)
    for row in rows:
        print(f"m={row['m']} KL={row['kl']:.10g} TVD={row['tvd']:.10g} F={row['fidelity']:.10g}")
    return EXIT_OK


def _handle_sample(args) -> int:
    result = cmd_sample(args.checkpoint, args.shots, args.seed, args.output_dir, args.max_qubits)
    print(f"shots={result['shots']} outcomes={result['outcomes']} TVD_to_exact={result['tvd']:.6g}")
    return EXIT_OK


def _handle_analyze(args) -> int:
    readout = None
    if args.readout:
        readout = TrainConfig(
            seed=args.seed,
            max_qubits=args.max_qubits,
            **{dest: getattr(args, dest) for dest, *_ in READOUT_OPTIONS},
        )
    table = cmd_analyze(
        args.checkpoint, args.subset, args.shots, args.trials, args.percentile, args.seed,
        args.output_dir, args.counts, args.exact, args.max_qubits, readout,
    )
    print(table.to_string(index=False))
    return EXIT_OK


def _handle_export(args) -> int:
    text = cmd_export(args.checkpoint, args.format, args.basis)
    if args.output:
        session = ArtifactSession(args.output_dir)
        print(session.write_text(args.output, text))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="qcbm-loader",
        description="Load grayscale images into quantum circuit Born machines",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)
    defaults = RunConfig()

    train = commands.add_parser("train", help="hierarchical (or --flat) training on one image",
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_run_options(train)
    train.set_defaults(handler=_handle_train)

    bae = commands.add_parser("train-bae", help="block-amplitude encoding, one model per tile",
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    _add_run_options(bae)
    bae.set_defaults(handler=_handle_train_bae)

    metrics = commands.add_parser("metrics", help="KL / TVD / fidelity of a checkpoint at chosen resolutions",
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    metrics.add_argument("--checkpoint", required=True, help="checkpoint.json written by train")
    metrics.add_argument("--image", required=True, help="image the checkpoint is compared against")
    metrics.add_argument("--resolution", type=int, action="append", default=None,
                         help="qubit resolution m, repeatable; full resolution when omitted")
    metrics.add_argument("--max-qubits", type=int, default=defaults.optimizer.max_qubits, help="simulator qubit cap")
    metrics.set_defaults(handler=_handle_metrics)

    sample = commands.add_parser("sample", help="draw shots from a checkpoint",
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sample.add_argument("--checkpoint", required=True, help="checkpoint.json")
    sample.add_argument("--shots", type=int, default=defaults.shots, help="number of shots")
    sample.add_argument("--seed", type=int, default=0, help="sampling seed")
    sample.add_argument("--output-dir", default=defaults.output_dir, help="directory for counts.csv and empirical.pgm")
    sample.add_argument("--max-qubits", type=int, default=defaults.optimizer.max_qubits, help="simulator qubit cap")
    sample.set_defaults(handler=_handle_sample)

    analyze = commands.add_parser("analyze", help="marginal L1 report with mixed-state baseline",
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    analyze.add_argument("--checkpoint", action="append", required=True, help="checkpoint.json, repeatable")
    analyze.add_argument("--counts", action="append", default=None,
                         help="measured counts CSV (index,count) per checkpoint, repeatable")
    analyze.add_argument("--subset", type=_int_list, default=[0, 1, 2, 3], help="qubits S, comma separated, 0-based")
    analyze.add_argument("--shots", type=int, default=100, help="shots per experiment")
    analyze.add_argument("--trials", type=int, default=10000, help="Monte Carlo trials for the percentile")
    analyze.add_argument("--percentile", type=float, default=99.0, help="percentile of the mixed-state L1")
    analyze.add_argument("--seed", type=int, default=0, help="sampling seed")
    analyze.add_argument("--exact", action="store_true", help="use exact model marginals instead of sampling")
    analyze.add_argument("--output-dir", default=defaults.output_dir, help="directory for tables and charts")
    analyze.add_argument("--max-qubits", type=int, default=defaults.optimizer.max_qubits, help="simulator qubit cap")
    analyze.add_argument("--readout", action="store_true",
                         help="also learn a readout layer for each checkpoint's leading qubits")
    for dest, flag, kind, text in READOUT_OPTIONS:
        analyze.add_argument(flag, dest=dest, type=kind, default=TrainConfig.model_fields[dest].default, help=text)
    analyze.set_defaults(handler=_handle_analyze)

    export = commands.add_parser("export", help="print a checkpoint's circuit",
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    export.add_argument("--checkpoint", required=True, help="checkpoint.json")
    export.add_argument("--format", choices=[item.value for item in ExportFormatEnum],
                        default=ExportFormatEnum.QASM2.value, help="output format")
    export.add_argument("--basis", choices=[item.value for item in BasisEnum],
                        default=BasisEnum.RZZ_NATIVE.value, help="two-qubit basis")
    export.add_argument("--output", default=None, help="file name under --output-dir; stdout when omitted")
    export.add_argument("--output-dir", default=defaults.output_dir, help="directory for --output")
    export.set_defaults(handler=_handle_export)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CommandError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    configure_logging(args.verbose, args.quiet)
    try:
        return args.handler(args)
    except CommandError as e:
        logger.error(e.detail)
        return e.exit_code
    except USAGE_ERRORS as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_USAGE
    except (QcbmError, ArithmeticError, MemoryError, ValueError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_COMPUTE
