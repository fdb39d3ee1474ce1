import pytest
from pydantic import ValidationError

from carleman_lab.config import DEFAULT_K
from carleman_lab.models.factories import ExperimentConfigFactory
from carleman_lab.schemas.reports import EpsRule, ResolventRun


class TestExperimentConfig:
    """Test suite for the experiment file schema."""

    def test_factory_defaults(self):
        """Test a minimal config is filled with section defaults."""
        config = ExperimentConfigFactory()

        assert config.experiment.case == "linfty"
        assert config.constants.K == DEFAULT_K
        assert config.resolvent.n == 1
        assert config.resolvent.signs == [1]
        assert config.test_functions.family == "random_band_limited"
        assert config.output_dir is None

    def test_h_grid_sorted_descending(self):
        """Test h values are stored from largest to smallest."""
        config = ExperimentConfigFactory(grid={"h": [0.05, 0.2, 0.1]})

        assert config.grid.h == [0.2, 0.1, 0.05]

    @pytest.mark.parametrize("h_values", [[], [0.0], [1.5], [0.1, -0.1]])
    def test_invalid_h_grid(self, h_values):
        """Test an empty or out-of-range h grid is rejected."""
        with pytest.raises(ValidationError):
            ExperimentConfigFactory(grid={"h": h_values})

    def test_eta_defaults_to_two_s_minus_one(self):
        """Test eta is derived from s when not given."""
        config = ExperimentConfigFactory(constants={"s": 0.8})

        assert config.constants.eta is None
        assert config.constants.eta_value == pytest.approx(0.6)

    def test_explicit_eta_wins(self):
        config = ExperimentConfigFactory(constants={"eta": 0.3})

        assert config.constants.eta_value == 0.3

    @pytest.mark.parametrize("s", [0.5, 1.0])
    def test_s_range(self, s):
        """Test s is restricted to (1/2, 1)."""
        with pytest.raises(ValidationError):
            ExperimentConfigFactory(constants={"s": s})

    def test_linfty_requires_alpha_zero(self):
        with pytest.raises(ValidationError) as exc_info:
            ExperimentConfigFactory(constants={"alpha": 0.5})
        assert "alpha must be 0 in the linfty case" in str(exc_info.value)

    def test_line_case_requires_line_potential(self):
        with pytest.raises(ValidationError) as exc_info:
            ExperimentConfigFactory(experiment={"case": "holder_1d"})
        assert "dimension_mode = 'line'" in str(exc_info.value)

    def test_radial_case_rejects_line_potential(self):
        with pytest.raises(ValidationError) as exc_info:
            ExperimentConfigFactory(
                experiment={"case": "holder_radial"}, potential={"family": "free_zero", "dimension_mode": "line"},
            )
        assert "dimension_mode = 'radial'" in str(exc_info.value)

    def test_dimension_two_rejected(self):
        with pytest.raises(ValidationError) as exc_info:
            ExperimentConfigFactory(resolvent={"n": 2})
        assert "dimension must be 1 or at least 3" in str(exc_info.value)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfigFactory(constants={"temperature": 1.0})

    def test_negative_seed_rejected(self):
        with pytest.raises(ValidationError):
            ExperimentConfigFactory(experiment={"seed": -1})


class TestEpsRule:
    """Test suite for EpsRule."""

    def test_power_rule(self):
        rule = EpsRule(kind="power", coefficient=2.0, exponent=1.5)

        assert rule(0.25) == pytest.approx(0.25)

    def test_constant_rule(self):
        rule = EpsRule(kind="constant", coefficient=0.3)

        assert rule(0.01) == 0.3

    def test_default_is_eps_equal_h(self):
        assert EpsRule()(0.1) == pytest.approx(0.1)


class TestResolventRun:
    """Test suite for ResolventRun."""

    def _data(self, **overrides):
        data = {"h": 0.1, "eps": 0.1, "E": 1.0, "s": 1.0, "L": 20.0, "N": 1600, "g_value": 3.0, "converged": True}
        data.update(overrides)
        return data

    def test_valid_run(self):
        run = ResolventRun(**self._data())

        assert run.sign == 1
        assert run.l == 0
        assert run.resolution_ok is True

    def test_g_must_be_positive(self):
        with pytest.raises(ValidationError) as exc_info:
            ResolventRun(**self._data(g_value=0.0))
        assert "g_value must be positive" in str(exc_info.value)

    def test_weight_exponent_above_one_half(self):
        with pytest.raises(ValidationError) as exc_info:
            ResolventRun(**self._data(s=0.5))
        assert "s must exceed 1/2" in str(exc_info.value)
