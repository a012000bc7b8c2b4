import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

import xmltodict  # type: ignore
from pydantic import ValidationError
from xml.parsers.expat import ExpatError

from qcbm_loader.models.errors import ConfigError
from qcbm_loader.models.schemas import RunConfig

logger = logging.getLogger(__name__)

# (XML path under <configuration>, RunConfig key, optimizer sub-key or None)
FIELD_MAP: List[Tuple[str, str, Any]] = [
    ("input", "input", None),
    ("outputDir", "output_dir", None),
    ("schedule.layers", "layers", None),
    ("schedule.totalIterations", "total_iterations", None),
    ("schedule.parameterBudget", "parameter_budget", None),
    ("schedule.flat", "flat", None),
    ("blocks.b", "blocks", None),
    ("blocks.parallel", "parallel", None),
    ("blocks.grid", "grid", None),
    ("image.downsample", "downsample", None),
    ("sampling.shots", "shots", None),
    ("optimizer.learningRate", "optimizer", "learning_rate"),
    ("optimizer.iterations", "optimizer", "iterations"),
    ("optimizer.seed", "optimizer", "seed"),
    ("optimizer.klEpsilon", "optimizer", "kl_epsilon"),
    ("optimizer.beta1", "optimizer", "adam_beta1"),
    ("optimizer.beta2", "optimizer", "adam_beta2"),
    ("optimizer.epsilon", "optimizer", "adam_epsilon"),
    ("optimizer.logEvery", "optimizer", "log_every"),
    ("readout.threshold", "optimizer", "readout_threshold"),
    ("readout.iterations", "optimizer", "readout_iterations"),
    ("readout.learningRate", "optimizer", "readout_learning_rate"),
    ("engine.maxQubits", "optimizer", "max_qubits"),
]


def _parse(xml_file) -> Dict[str, Any]:
    path = Path(xml_file)
    if not path.exists():
        raise FileNotFoundError(f"configuration file {path} not found")
    with open(path, "r", encoding="utf-8") as file:
        text = file.read()
    try:
        return xmltodict.parse(text)
    except ExpatError as e:
        raise ConfigError(f"Failed to parse XML: {e}")


def _lookup(config_dict: Dict[str, Any], section: str) -> Any:
    current: Any = config_dict
    for key in section.split("."):
        if not isinstance(current, dict) or key not in current:
            raise KeyError(section)
        current = current[key]
    return current


def xml_to_dict(xml_file) -> RunConfig:
    """
    Parses an XML run configuration into a validated RunConfig.

    Args:
        xml_file (str): Path to the XML file.

    Returns:
        RunConfig with every key absent from the file at its default.

    Notes:
        - Expects the XML to have this structure (every element optional):
          <configuration>
            <input>digit.pgm</input>
            <outputDir>runs/digit</outputDir>
            <schedule>
              <layers>1,1,2,2,2</layers>
              <totalIterations>600</totalIterations>
              <parameterBudget>300</parameterBudget>
              <flat>false</flat>
            </schedule>
            <blocks><b>2</b><parallel>4</parallel></blocks>
            <image><downsample>1</downsample></image>
            <sampling><shots>10000</shots></sampling>
            <optimizer>
              <learningRate>0.01</learningRate>
              <seed>0</seed>
            </optimizer>
            <readout><threshold>0.4</threshold></readout>
            <engine><maxQubits>24</maxQubits></engine>
          </configuration>
    """
    config_dict = _parse(xml_file)
    if not isinstance(config_dict, dict) or "configuration" not in config_dict:
        raise ConfigError("missing <configuration> root element")
    root = config_dict["configuration"]
    if not isinstance(root, dict):
        root = {}

    values: Dict[str, Any] = {}
    optimizer: Dict[str, Any] = {}
    for section, key, sub_key in FIELD_MAP:
        try:
            raw = _lookup(root, section)
        except KeyError:
            continue
        if raw is None:
            continue
        if key in ("layers", "grid"):
            raw = [item.strip() for item in str(raw).split(",") if item.strip()]
        if sub_key:
            optimizer[sub_key] = raw
        else:
            values[key] = raw
    if optimizer:
        values["optimizer"] = optimizer
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration in {xml_file}: {e}")


def validate_xml_config(xml_file) -> Dict[str, Any]:
    """
    Validates that the XML configuration file has all required sections.

    Args:
        xml_file (str): Path to the XML file

    Returns:
        dict: Validation results with status, missing sections and warnings
    """
    validation_result: Dict[str, Any] = {
        "valid": True,
        "missing_sections": [],
        "warnings": [],
    }
    try:
        config_dict = _parse(xml_file)
    except (ConfigError, FileNotFoundError) as e:
        return {"valid": False, "error": str(e), "missing_sections": [], "warnings": []}

    if not isinstance(config_dict, dict) or "configuration" not in config_dict:
        validation_result["valid"] = False
        validation_result["missing_sections"].append("configuration")
        return validation_result
    root = config_dict["configuration"] or {}

    for section in ("input",):
        try:
            _lookup(root, section)
        except KeyError:
            validation_result["valid"] = False
            validation_result["missing_sections"].append(f"configuration.{section}")

    known = {section.split(".")[0] for section, _, _ in FIELD_MAP}
    for key in root:
        if key not in known:
            validation_result["warnings"].append(f"Unknown section ignored: configuration.{key}")
    for section in ("schedule.layers", "schedule.parameterBudget"):
        try:
            _lookup(root, section)
            break
        except KeyError:
            continue
    else:
        validation_result["warnings"].append("Neither schedule.layers nor schedule.parameterBudget set, one layer per stage")

    try:
        xml_to_dict(xml_file)
    except ConfigError as e:
        validation_result["valid"] = False
        validation_result["warnings"].append(str(e))
    return validation_result
