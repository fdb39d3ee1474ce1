import json
from unittest.mock import patch

import pandas as pd
import pytest

from carleman_lab.models.factories import ExperimentConfigFactory
from carleman_lab.pipeline import (
    EXIT_ASSERTION_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_STAGE_ERROR,
    ConfigError,
    apply_overrides,
    load_config,
    locate_field,
    run,
    run_file,
)
from carleman_lab.services.artifact_publisher import config_hash
from carleman_lab.stages import stages_for

FREE_LINFTY = """\
[experiment]
name = "free"
case = "linfty"

[potential]
family = "free_zero"
dimension_mode = "radial"

[envelope]
family = "log_decay"

[constants]
alpha = {alpha}
E = 1.0

[grid]
h = {h}
r_max = 1000.0
n_check = 400
"""

LINE_SWEEP = """\
[experiment]
name = "line-sweep"
case = "holder_1d"

[potential]
family = "free_zero"
dimension_mode = "line"

[envelope]
family = "one_over_rlog2"

[constants]
s = 0.75

[grid]
h = [0.5, 0.4, 0.3]

[resolvent]
n = 1
L = 10.0
N = 400
eps_rule = {{ kind = "constant", coefficient = 1.0 }}
"""


def _write(tmp_path, text, name="experiment.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _error_json(out):
    return json.loads((out / "error.json").read_text())


class TestLocateField:
    def setup_method(self):
        self.text = FREE_LINFTY.format(alpha=1.5, h="[0.1]") + '\n[resolvent]\neps_rule = { kind = "power" }\n'

    def test_key_inside_section(self):
        assert locate_field(self.text, ("constants", "alpha")) == 13

    def test_section_header(self):
        assert locate_field(self.text, ("grid",)) == 16

    def test_inline_table_member(self):
        assert locate_field(self.text, ("resolvent", "eps_rule", "kind")) == 22

    def test_list_indices_are_ignored(self):
        assert locate_field(self.text, ("grid", "h", 0)) == 17

    def test_unknown_field(self):
        assert locate_field(self.text, ("constants", "missing")) is None
        assert locate_field(self.text, ()) is None


class TestLoadConfig:
    def test_valid_file(self, tmp_path):
        config = load_config(_write(tmp_path, FREE_LINFTY.format(alpha=0.0, h="[0.2, 0.1]")))

        assert config.experiment.case == "linfty"
        assert config.grid.h == [0.2, 0.1]

    def test_out_of_range_value_names_field_and_line(self, tmp_path):
        # Arrange
        path = _write(tmp_path, FREE_LINFTY.format(alpha=1.5, h="[0.1]"))

        # Act
        with pytest.raises(ConfigError) as exc_info:
            load_config(path)

        # Assert
        assert exc_info.value.field == "constants.alpha"
        assert exc_info.value.line == 13
        assert "(line 13)" in str(exc_info.value)

    def test_invalid_toml(self, tmp_path):
        path = _write(tmp_path, "[experiment\ncase = 1\n")

        with pytest.raises(ConfigError) as exc_info:
            load_config(path)
        assert "Invalid TOML" in str(exc_info.value)
        assert exc_info.value.line == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as exc_info:
            load_config(tmp_path / "absent.toml")
        assert "Cannot read config" in str(exc_info.value)


class TestApplyOverrides:
    def test_seed_and_output_dir(self):
        # Arrange
        config = ExperimentConfigFactory()

        # Act
        updated = apply_overrides(config, seed=11, out="elsewhere")

        # Assert
        assert updated.experiment.seed == 11
        assert updated.output_dir == "elsewhere"
        assert config_hash(updated) != config_hash(config)

    def test_no_overrides_keeps_hash(self):
        config = ExperimentConfigFactory()

        assert config_hash(apply_overrides(config)) == config_hash(config)


class TestStageOrder:
    @pytest.mark.parametrize("stage, expected", [
        ("check-potential", ["check-potential"]),
        ("certify", ["check-potential", "mollify", "construct", "certify"]),
        ("fit", ["resolvent-sweep", "fit"]),
    ])
    def test_prerequisites(self, stage, expected):
        assert stages_for(stage) == expected

    def test_all_runs_every_stage(self):
        assert len(stages_for("all")) == 7

    def test_unknown_stage(self):
        with pytest.raises(ValueError) as exc_info:
            stages_for("plot")
        assert "Unknown stage" in str(exc_info.value)


class TestRunFile:
    def test_config_error_exits_two_and_writes_report(self, tmp_path):
        # Arrange
        path = _write(tmp_path, FREE_LINFTY.format(alpha=1.5, h="[0.1]"))
        out = tmp_path / "out"

        # Act
        status = run_file(path, stage="check-potential", out=str(out))

        # Assert
        assert status == EXIT_CONFIG_ERROR
        report = _error_json(out)
        assert report["status_code"] == 2
        assert report["code"] == "CONFIG_ERROR"
        assert "constants.alpha" in report["message"]
        assert report["details"] == "field=constants.alpha, line=13"

    def test_check_potential_passes_for_free_case(self, tmp_path):
        # Arrange
        path = _write(tmp_path, FREE_LINFTY.format(alpha=0.0, h="[0.2, 0.1]"))
        out = tmp_path / "out"

        # Act
        status = run_file(path, stage="check-potential", out=str(out))

        # Assert
        assert status == EXIT_OK
        frame = pd.read_csv(out / "check-potential.csv", dtype={"config_hash": str})
        assert frame["condition"][0] == "Linfty_decay"
        assert len(frame["config_hash"][0]) == 16
        assert not (out / "error.json").exists()

    def test_fit_with_three_h_values_fails_assertion(self, tmp_path):
        # Arrange
        path = _write(tmp_path, LINE_SWEEP)
        out = tmp_path / "out"

        # Act
        status = run_file(path, stage="fit", out=str(out))

        # Assert
        assert status == EXIT_ASSERTION_FAILED
        report = _error_json(out)
        assert report["stage"] == "fit"
        assert report["code"] == "FitError"
        assert "fewer than 5 points" in report["message"]
        assert (out / "resolvent-sweep.csv").exists()


class TestRun:
    def test_hypothesis_violation_exits_one(self, tmp_path):
        # Arrange
        config = ExperimentConfigFactory(
            potential={"family": "constant", "params": {"value": 0.3}},
        ).model_copy(update={"output_dir": str(tmp_path)})

        # Act
        status, outcomes = run(config, stage="check-potential")

        # Assert
        assert status == EXIT_ASSERTION_FAILED
        assert outcomes[-1].passed is False
        assert "exceeds E_infty" in outcomes[-1].message
        assert _error_json(tmp_path)["code"] == "HypothesisViolationError"

    def test_unexpected_failure_exits_three(self, tmp_path):
        # Arrange
        config = ExperimentConfigFactory().model_copy(update={"output_dir": str(tmp_path)})

        def explode(ctx):
            raise RuntimeError("boom")

        # Act
        with patch.dict("carleman_lab.stages.STAGE_HANDLERS", {"check-potential": explode}):
            with patch("carleman_lab.pipeline.logger") as mock_logger:
                status, outcomes = run(config, stage="check-potential")

        # Assert
        assert status == EXIT_STAGE_ERROR
        report = _error_json(tmp_path)
        assert report["code"] == "STAGE_ERROR"
        assert report["details"] == "RuntimeError: boom"
        assert "check-potential.csv" in mock_logger.error.call_args[0][0]

    def test_failed_check_without_exception_exits_one(self, tmp_path):
        # Arrange
        from carleman_lab.stages import StageOutcome

        config = ExperimentConfigFactory().model_copy(update={"output_dir": str(tmp_path)})

        # Act
        with patch.dict("carleman_lab.stages.STAGE_HANDLERS", {"check-potential": lambda ctx: StageOutcome("check-potential", False)}):
            status, _ = run(config, stage="check-potential")

        # Assert
        assert status == EXIT_ASSERTION_FAILED
        assert _error_json(tmp_path)["code"] == "ASSERTION_FAILED"
