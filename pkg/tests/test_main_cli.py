from pathlib import Path
from unittest.mock import patch

import pytest

from carleman_lab.main import build_parser, main


class TestParser:
    def test_positional_stage(self):
        args = build_parser().parse_args(["certify", "--config", "exp.toml"])

        assert args.command == "certify"
        assert args.config == Path("exp.toml")
        assert args.threads == 1
        assert args.seed is None

    def test_config_is_required(self):
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(["fit"])
        assert exc_info.value.code == 2

    def test_unknown_stage(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["plot", "--config", "exp.toml"])

    @pytest.mark.parametrize("seed", ["-1", str(2 ** 64), "abc"])
    def test_seed_must_be_unsigned_64_bit(self, seed):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["--config", "exp.toml", "--seed", seed])

    def test_largest_seed_accepted(self):
        args = build_parser().parse_args(["--config", "exp.toml", "--seed", str(2 ** 64 - 1)])

        assert args.seed == 2 ** 64 - 1


class TestMain:
    def test_defaults_to_all(self):
        # Arrange
        with patch("carleman_lab.main.run_file", return_value=0) as mock_run:
            # Act
            status = main(["--config", "exp.toml"])

        # Assert
        assert status == 0
        mock_run.assert_called_once_with(Path("exp.toml"), stage="all", out=None, threads=1, seed=None)

    def test_stage_flag_and_overrides(self):
        with patch("carleman_lab.main.run_file", return_value=1) as mock_run:
            status = main(["--config", "exp.toml", "--stage", "fit", "--out", "o", "--threads", "4", "--seed", "9"])

        assert status == 1
        mock_run.assert_called_once_with(Path("exp.toml"), stage="fit", out="o", threads=4, seed=9)

    def test_matching_positional_and_flag(self):
        with patch("carleman_lab.main.run_file", return_value=0) as mock_run:
            main(["fit", "--config", "exp.toml", "--stage", "fit"])

        assert mock_run.call_args.kwargs["stage"] == "fit"

    def test_conflicting_stages(self):
        with patch("carleman_lab.main.run_file") as mock_run:
            with pytest.raises(SystemExit) as exc_info:
                main(["fit", "--config", "exp.toml", "--stage", "construct"])

        assert exc_info.value.code == 2
        mock_run.assert_not_called()

    def test_threads_below_one(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["--config", "exp.toml", "--threads", "0"])
        assert exc_info.value.code == 2

    def test_exit_status_of_a_real_config_error(self, tmp_path):
        # Arrange
        path = tmp_path / "bad.toml"
        path.write_text('[experiment]\ncase = "parabolic"\n\n[potential]\nfamily = "free_zero"\n\n[envelope]\nfamily = "log_decay"\n')
        out = tmp_path / "out"

        # Act
        status = main(["check-potential", "--config", str(path), "--out", str(out)])

        # Assert
        assert status == 2
        assert (out / "error.json").exists()
