import json
from unittest.mock import patch

import pandas as pd
import pytest

from carleman_lab.schemas.error import ErrorReport
from carleman_lab.schemas.potential import ClassCertificate
from carleman_lab.services.artifact_publisher import ArtifactPublisher, ArtifactWriteError, config_hash


class TestConfigHash:
    def test_is_sixteen_hex_digits(self, experiment_config):
        digest = config_hash(experiment_config)

        assert len(digest) == 16
        int(digest, 16)

    def test_is_stable(self, experiment_config):
        assert config_hash(experiment_config) == config_hash(experiment_config.model_copy(deep=True))

    def test_depends_on_seed(self, experiment_config):
        assert config_hash(experiment_config, seed=1) != config_hash(experiment_config, seed=2)

    def test_default_seed_comes_from_config(self, experiment_config):
        seed = experiment_config.experiment.seed

        assert config_hash(experiment_config) == config_hash(experiment_config, seed=seed)


class TestWriteCsv:
    def test_rows_carry_config_hash(self, publisher, output_dir):
        # Act
        path = publisher.write_csv("fit", [{"h": 0.1, "g": 2.5}, {"h": 0.05, "g": 7.0}])

        # Assert
        assert path == output_dir / "fit.csv"
        frame = pd.read_csv(path, dtype={"config_hash": str})
        assert list(frame.columns) == ["h", "g", "config_hash"]
        assert set(frame["config_hash"]) == {"0123456789abcdef"}

    def test_full_precision_and_unix_newlines(self, publisher):
        # Arrange
        value = 0.1 + 0.2

        # Act
        path = publisher.write_csv("precision", pd.DataFrame({"x": [value]}))

        # Assert
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        assert pd.read_csv(path)["x"][0] == value

    def test_identical_inputs_give_identical_bytes(self, publisher):
        frame = pd.DataFrame({"h": [0.2, 0.1], "g": [1.0 / 3.0, 2.0 / 3.0]})

        first = publisher.write_csv("a", frame).read_bytes()
        second = publisher.write_csv("b", frame).read_bytes()

        assert first == second

    def test_input_frame_is_not_modified(self, publisher):
        frame = pd.DataFrame({"h": [0.1]})

        publisher.write_csv("fit", frame)

        assert "config_hash" not in frame.columns


class TestWriteJson:
    def test_model_payload_gets_hash(self, publisher):
        # Arrange
        certificate = ClassCertificate(
            condition="Linfty_decay", alpha=0.0, c_const=0.5, V_infty=0.0, delta_V=1.0, R_EV=2.0, E=1.0, E_infty=0.0,
        )

        # Act
        path = publisher.write_json("check-potential", certificate)

        # Assert
        document = json.loads(path.read_text())
        assert document["condition"] == "Linfty_decay"
        assert document["config_hash"] == "0123456789abcdef"

    def test_keys_are_sorted(self, publisher):
        path = publisher.write_json("summary", {"zeta": 1, "alpha": 2})

        text = path.read_text()

        assert text.index('"alpha"') < text.index('"config_hash"') < text.index('"zeta"')
        assert text.endswith("\n")

    def test_list_payload_is_written_as_is(self, publisher):
        path = publisher.write_json("list", [1, 2, 3])

        assert json.loads(path.read_text()) == [1, 2, 3]

    def test_write_error(self, publisher, output_dir):
        # Arrange
        report = ErrorReport(status_code=2, code="config_error", message="alpha out of range", details="line 4")

        # Act
        path = publisher.write_error(report)

        # Assert
        assert path == output_dir / "error.json"
        document = json.loads(path.read_text())
        assert document["status_code"] == 2
        assert document["code"] == "config_error"
        assert document["stage"] is None

    def test_unserializable_payload_raises(self, publisher):
        with patch("carleman_lab.services.artifact_publisher.logger") as mock_logger:
            with pytest.raises(ArtifactWriteError) as exc_info:
                publisher.write_json("bad", {"value": object()})

        assert "Cannot write" in str(exc_info.value)
        assert exc_info.value.path.name == "bad.json"
        mock_logger.error.assert_called_once()


class TestOutputDirectory:
    def test_directory_is_created(self, tmp_path):
        publisher = ArtifactPublisher(tmp_path / "nested" / "deeper", "0123456789abcdef")

        path = publisher.write_json("fit", {"ok": True})

        assert path.exists()

    def test_file_in_place_of_directory(self, tmp_path):
        # Arrange
        blocker = tmp_path / "occupied"
        blocker.write_text("not a directory")
        publisher = ArtifactPublisher(blocker, "0123456789abcdef")

        # Act & Assert
        with pytest.raises(ArtifactWriteError) as exc_info:
            publisher.write_csv("fit", [{"h": 0.1}])
        assert "Cannot create output directory" in str(exc_info.value)
