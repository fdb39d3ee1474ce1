import logging
import re
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from carleman_lab import config as settings
from carleman_lab.results_sink import ResultsSink
from carleman_lab.schemas.error import ErrorReport
from carleman_lab.schemas.experiment import ExperimentConfig
from carleman_lab.services.artifact_publisher import ArtifactPublisher, ArtifactWriteError, config_hash
from carleman_lab.services.carleman_construct import ConstructionSearchError, IntegrationCrossCheckError
from carleman_lab.services.potential_classes import HypothesisViolationError
from carleman_lab.services.resolvent_lab import FitError
from carleman_lab.stages import STAGE_HANDLERS, StageContext, StageOutcome, stages_for

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_STAGE_ERROR = 3

# Domain failures of a requested check: reported as a failed assertion, not a crash
ASSERTION_ERRORS = (HypothesisViolationError, ConstructionSearchError, IntegrationCrossCheckError, FitError)


class ConfigError(Exception):
    """Raised when an experiment file cannot be read or validated."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line


class StageError(Exception):
    """Raised when a stage fails unexpectedly."""

    def __init__(self, message: str, stage: str, artifact_path: Optional[Path] = None):
        super().__init__(message)
        self.stage = stage
        self.artifact_path = artifact_path


def locate_field(text: str, loc: Sequence[Any]) -> Optional[int]:
    """1-based line of a dotted field inside a TOML document, or of its section header."""
    keys = [str(part) for part in loc if not isinstance(part, int)]
    if not keys:
        return None
    section, key = keys[:-1], keys[-1]
    current: List[str] = []
    header_line = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        header = re.fullmatch(r"\[([^\[\]]+)\]", line)
        if header:
            current = [part.strip() for part in header.group(1).split(".")]
            if current == keys:
                header_line = number
            continue
        match = re.match(r"([A-Za-z0-9_\-]+)\s*=", line)
        if match and current == section and match.group(1) == key:
            return number
        if match and current == keys[:-2] and section and match.group(1) == section[-1]:
            # inline table such as eps_rule = { kind = "power" }
            return number
    return header_line


def load_config(path: Path) -> ExperimentConfig:
    """Parse and validate an experiment file.

    Raises:
        ConfigError: naming the offending field and its line when either is known
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        match = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"Invalid TOML in {path}: {e}", line=int(match.group(1)) if match else None)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first.get("loc", ())
        field = ".".join(str(part) for part in loc) or None
        line = locate_field(text, loc)
        where = f" (line {line})" if line is not None else ""
        raise ConfigError(f"Invalid value for {field}{where}: {first.get('msg')}", field=field, line=line)


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    data: Dict[str, Any] = config.model_dump()
    if seed is not None:
        data["experiment"]["seed"] = seed
    if out is not None:
        data["output_dir"] = out
    return ExperimentConfig.model_validate(data)


def _error_report(status: int, code: str, message: str, stage: Optional[str] = None, details: Optional[str] = None) -> ErrorReport:
    return ErrorReport(status_code=status, code=code, message=message, stage=stage, details=details)


def _write_error(publisher: ArtifactPublisher, report: ErrorReport) -> None:
    try:
        publisher.write_error(report)
    except ArtifactWriteError as e:
        logger.error(f"Could not write error report: {e}", exc_info=True)


def run(
    config: ExperimentConfig,
    stage: str = "all",
    threads: int = settings.DEFAULT_THREADS,
) -> Tuple[int, List[StageOutcome]]:
    """Run the requested stage with its prerequisites; returns the exit status and stage outcomes."""
    output_dir = Path(config.output_dir or settings.OUTPUT_DIR)
    digest = config_hash(config)
    publisher = ArtifactPublisher(output_dir, digest)
    ctx = StageContext(config=config, publisher=publisher, sink=ResultsSink(digest), threads=threads)
    ctx.resolvent.seed = config.experiment.seed

    outcomes: List[StageOutcome] = []
    for name in stages_for(stage):
        try:
            outcome = STAGE_HANDLERS[name](ctx)
        except ASSERTION_ERRORS as e:
            logger.error(f"Stage {name} failed its checks: {e}", exc_info=True)
            _write_error(publisher, _error_report(EXIT_ASSERTION_FAILED, type(e).__name__, str(e), stage=name))
            outcomes.append(StageOutcome(name, False, message=str(e)))
            return EXIT_ASSERTION_FAILED, outcomes
        except Exception as e:
            path = output_dir / f"{name}.csv"
            error = StageError(f"Stage {name} failed: {e}", stage=name, artifact_path=path)
            logger.error(f"{error} (artifact {path})", exc_info=True)
            _write_error(
                publisher,
                _error_report(EXIT_STAGE_ERROR, "STAGE_ERROR", str(error), stage=name, details=f"{type(e).__name__}: {e}"),
            )
            outcomes.append(StageOutcome(name, False, message=str(error)))
            return EXIT_STAGE_ERROR, outcomes
        outcomes.append(outcome)
        logger.info(f"Stage {name} {'passed' if outcome.passed else 'FAILED'}; artifacts {[str(p) for p in outcome.artifacts]}")

    failed = [outcome.stage for outcome in outcomes if not outcome.passed]
    if failed:
        _write_error(
            publisher,
            _error_report(EXIT_ASSERTION_FAILED, "ASSERTION_FAILED", f"Stages failed their checks: {failed}", stage=failed[0]),
        )
        return EXIT_ASSERTION_FAILED, outcomes
    return EXIT_OK, outcomes


def run_file(
    path: Path,
    stage: str = "all",
    out: Optional[str] = None,
    threads: int = settings.DEFAULT_THREADS,
    seed: Optional[int] = None,
) -> int:
    """Load, override and run; configuration errors become exit status 2 with an error report."""
    try:
        config = apply_overrides(load_config(path), seed=seed, out=out)
    except (ConfigError, ValidationError) as e:
        field = getattr(e, "field", None)
        line = getattr(e, "line", None)
        logger.error(f"Configuration error: {e}")
        report = _error_report(
            EXIT_CONFIG_ERROR, "CONFIG_ERROR", str(e),
            details=f"field={field}, line={line}" if field or line else None,
        )
        _write_error(ArtifactPublisher(Path(out or settings.OUTPUT_DIR), "invalid-config"), report)
        return EXIT_CONFIG_ERROR
    status, _ = run(config, stage=stage, threads=threads)
    return status
