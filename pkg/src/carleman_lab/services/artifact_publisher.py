import hashlib
import json
import logging
from pathlib import Path
from typing import Any, List, Mapping, Optional, Union

import pandas as pd
from pydantic import BaseModel

from carleman_lab.schemas.error import ErrorReport
from carleman_lab.schemas.experiment import ExperimentConfig

logger = logging.getLogger(__name__)

JsonPayload = Union[BaseModel, Mapping[str, Any], List[Any]]


class ArtifactWriteError(Exception):
    """Raised when a CSV or JSON artifact cannot be written."""

    def __init__(self, message: str, path: Path):
        super().__init__(message)
        self.path = path


def config_hash(config: ExperimentConfig, seed: Optional[int] = None) -> str:
    """First 16 hex digits of sha256 over the canonical config JSON and the seed."""
    seed = config.experiment.seed if seed is None else seed
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(f"{canonical}|seed={seed}".encode("utf-8")).hexdigest()[:16]


def _jsonable(payload: JsonPayload) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    if isinstance(payload, Mapping):
        return {key: _jsonable(value) for key, value in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_jsonable(item) for item in payload]
    return payload


class ArtifactPublisher:
    """Writes one CSV and one JSON artifact per stage into the output directory.

    Every CSV row carries the config hash; CSVs use a header row, '.' decimals and
    full float precision so identical inputs give byte-identical files.
    """

    def __init__(self, output_dir: Union[str, Path], config_hash: str):
        self.output_dir = Path(output_dir)
        self.config_hash = config_hash

    def _prepare(self, name: str, suffix: str) -> Path:
        path = self.output_dir / f"{name}{suffix}"
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Failed to create output directory {self.output_dir}: {e}", exc_info=True)
            raise ArtifactWriteError(f"Cannot create output directory {self.output_dir}: {e}", path=path)
        return path

    def write_csv(self, name: str, frame: Union[pd.DataFrame, List[Mapping[str, Any]]]) -> Path:
        """Write a table; a config_hash column is added (or overwritten) on every row.

        Args:
            name: Artifact stem, usually the stage name
            frame: DataFrame or list of row dicts

        Returns:
            Path of the written file

        Raises:
            ArtifactWriteError: If the file cannot be written
        """
        path = self._prepare(name, ".csv")
        table = frame.copy() if isinstance(frame, pd.DataFrame) else pd.DataFrame(list(frame))
        table["config_hash"] = self.config_hash
        try:
            table.to_csv(path, index=False, float_format="%.17g", lineterminator="\n", encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to write CSV artifact {path}: {e}", exc_info=True)
            raise ArtifactWriteError(f"Cannot write {path}: {e}", path=path)
        logger.info(f"Wrote {len(table)} rows to {path}")
        return path

    def write_json(self, name: str, payload: JsonPayload) -> Path:
        path = self._prepare(name, ".json")
        document = _jsonable(payload)
        if isinstance(document, dict):
            document = {**document, "config_hash": self.config_hash}
        try:
            path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except (OSError, TypeError, ValueError) as e:
            logger.error(f"Failed to write JSON artifact {path}: {e}", exc_info=True)
            raise ArtifactWriteError(f"Cannot write {path}: {e}", path=path)
        logger.info(f"Wrote summary {path}")
        return path

    def write_error(self, report: ErrorReport) -> Path:
        return self.write_json("error", report)
