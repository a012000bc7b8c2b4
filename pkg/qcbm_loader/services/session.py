"""
Artifact Session - owns one run's output directory
Every file a command produces goes through here so nothing lands outside it
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)


class ArtifactSession:
    """
    Tracks the artifacts written for one command run
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.root = Path(output_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._artifacts: Dict[str, Path] = {}

    def path(self, name: str) -> Path:
        """
        Resolve an artifact name inside the output directory

        Args:
            name: Relative artifact name (may contain sub-directories)

        Returns:
            Absolute path, parent directory created
        """
        target = (self.root / name).resolve()
        if self.root.resolve() not in target.parents:
            raise ValueError(f"artifact {name!r} escapes the output directory")
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def record(self, name: str, path: Path) -> Path:
        self._artifacts[name] = path
        logger.debug("artifact %s -> %s", name, path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text, encoding="utf-8")
        return self.record(name, target)

    def write_json(self, name: str, payload: Any) -> Path:
        """
        Write a pydantic model or a JSON-serializable value

        Args:
            name: Artifact name
            payload: BaseModel, or list / dict of plain values

        Returns:
            Path written
        """
        if isinstance(payload, BaseModel):
            text = payload.model_dump_json(indent=2, by_alias=True)
        else:
            text = json.dumps(payload, indent=2)
        return self.write_text(name, text + "\n")

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False)
        return self.record(name, target)

    def child(self, name: str) -> "ArtifactSession":
        """Session for a sub-directory (per-block outputs)"""
        return ArtifactSession(self.root / name)

    def artifacts(self) -> Dict[str, str]:
        return {name: str(path) for name, path in self._artifacts.items()}
