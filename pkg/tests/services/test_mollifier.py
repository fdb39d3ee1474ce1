from unittest.mock import patch

import numpy as np
import pytest

from carleman_lab.models.factories import EnvelopeFactory, PotentialModelFactory
from carleman_lab.models.kernels import omega, psi, smooth_step
from carleman_lab.models.potentials import evaluate
from carleman_lab.schemas.potential import ClassCertificate
from carleman_lab.services.potential_classes import HypothesisViolationError, check_grid


class TestKernel:
    def test_unit_integral(self, kernel):
        assert kernel.integral() == pytest.approx(1.0, rel=1e-10)

    def test_support_and_peak(self, kernel):
        values = kernel.chi(np.array([-0.1, 0.0, 0.5, 1.0, 1.1]))

        assert values[0] == values[1] == values[3] == values[4] == 0.0
        assert values[2] == pytest.approx(1.0 / kernel.mass)

    def test_first_moment_is_one_half(self, kernel):
        assert kernel.moment(1.0) == pytest.approx(0.5, rel=1e-10)

    def test_constant_rejects_alpha_outside_range(self, kernel):
        with pytest.raises(ValueError) as exc_info:
            kernel.constant(1.5)
        assert "alpha must lie in [0, 1]" in str(exc_info.value)

    def test_constant_is_positive_and_decreasing(self, kernel):
        assert kernel.constant(0.0) > kernel.constant(1.0) > 0.0


class TestCutoffs:
    def test_smooth_step_limits(self):
        values = smooth_step(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))

        np.testing.assert_allclose(values, [0.0, 0.0, 0.5, 1.0, 1.0])

    def test_omega_plateau_and_support(self):
        values = omega(np.array([0.0, 0.5, -0.5, 0.75, 0.9]))

        np.testing.assert_allclose(values, [1.0, 1.0, 1.0, 0.0, 0.0])

    def test_psi_plateau_and_support(self):
        values = psi(np.array([0.0, 2.0, 3.0, 3.5]), 2.0)

        np.testing.assert_allclose(values, [1.0, 1.0, 0.0, 0.0])


class TestPointwiseMollification:
    def test_constant_is_preserved(self, mollifier_service):
        model = PotentialModelFactory("constant", "radial", value=0.7)

        value, _ = mollifier_service.mollify(model, 2.0, 0.3)
        slope, _ = mollifier_service.mollify_derivative(model, 2.0, 0.3)

        assert value == pytest.approx(0.7, rel=1e-9)
        assert slope == pytest.approx(0.0, abs=1e-12)

    def test_linear_shifts_by_half_gamma(self, mollifier_service):
        # Arrange
        model = PotentialModelFactory("linear", "radial", slope=1.0)

        # Act
        value, _ = mollifier_service.mollify(model, 2.0, 0.4)
        slope, _ = mollifier_service.mollify_derivative(model, 2.0, 0.4)

        # Assert
        assert value == pytest.approx(2.2, rel=1e-9)
        assert slope == pytest.approx(1.0, rel=1e-8)

    def test_step_average_lies_between_levels(self, mollifier_service):
        model = PotentialModelFactory("step_oscillation", "line", amplitude=0.25, period=1.0)

        value, _ = mollifier_service.mollify(model, 0.4, 0.2)

        assert -0.25 < value < 0.25

    def test_gamma_outside_unit_interval_rejected(self, mollifier_service, bump_model):
        with pytest.raises(ValueError) as exc_info:
            mollifier_service.mollify(bump_model, 1.0, 1.5)
        assert "gamma must lie in (0, 1]" in str(exc_info.value)


class TestBuildSmoothed:
    def test_linfty_case_keeps_full_remainder(self, mollifier_service, bump_model):
        grid = np.linspace(0.1, 3.0, 50)

        sp = mollifier_service.build_smoothed(bump_model, "linfty", 0.1, 1.0, grid)

        assert np.all(sp.Vh == 0.0)
        np.testing.assert_array_equal(sp.R_h, sp.V)

    def test_grid_quadrature_matches_pointwise(self, mollifier_service):
        # Arrange
        model = PotentialModelFactory("arctan", "radial", amplitude=1.0, scale=0.5)
        grid = np.linspace(0.1, 5.0, 40)
        h, rho = 0.1, 2.0 / 3.0

        # Act
        sp = mollifier_service.build_smoothed(model, "holder_radial", h, rho, grid)

        # Assert
        gamma = h ** rho
        assert sp.gamma == pytest.approx(gamma)
        for index in (0, 17, 39):
            value, _ = mollifier_service.mollify(model, float(grid[index]), gamma)
            slope, _ = mollifier_service.mollify_derivative(model, float(grid[index]), gamma)
            assert sp.Vh[index] == pytest.approx(value, rel=1e-8)
            assert sp.Vh_prime[index] == pytest.approx(slope, rel=1e-6)

    def test_one_dimensional_scale_is_h(self, mollifier_service, free_line_model):
        grid = np.linspace(-5.0, 5.0, 21)

        sp = mollifier_service.build_smoothed(free_line_model, "holder_1d", 0.2, 1.0, grid)

        assert sp.gamma == 0.2

    def test_h_beyond_delta_rejected(self, mollifier_service, free_line_model):
        # Arrange
        certificate = ClassCertificate(
            condition="holder_1d", alpha=0.0, c_const=1.0, V_infty=0.0, delta_V=0.1, R_EV=0.0, E=1.0, E_infty=0.0,
        )

        # Act & Assert
        with pytest.raises(HypothesisViolationError) as exc_info:
            mollifier_service.build_smoothed(
                free_line_model, "holder_1d", 0.2, 1.0, np.linspace(-1.0, 1.0, 11), certificate
            )
        assert "exceeds delta_0" in str(exc_info.value)

    def test_resample_reevaluates_V(self, mollifier_service, bump_model):
        grid = np.linspace(0.1, 3.0, 50)
        sp = mollifier_service.build_smoothed(bump_model, "linfty", 0.1, 1.0, grid)

        resampled = sp.resample(np.array([1.0, 2.0]))

        np.testing.assert_array_equal(resampled.V, [1.0, 0.0])
        np.testing.assert_array_equal(resampled.Vh, [0.0, 0.0])


class TestMollifierBounds:
    def setup_method(self):
        self.model = PotentialModelFactory("compact_bump", "radial", height=1.0, lo=0.5, hi=1.5, edge=0.25)
        self.envelope = EnvelopeFactory("log_decay")
        self.grid = check_grid(self.model, 100.0, 400)

    def _certificate(self, c1):
        return ClassCertificate(
            condition="Linfty_decay", alpha=0.0, c_const=c1, V_infty=0.0, delta_V=1.0, R_EV=2.0, E=1.0, E_infty=0.0,
        )

    def test_linfty_remainder_within_c1(self, mollifier_service, potential_service):
        # Arrange
        c1 = potential_service.check_linfty_decay(self.model, self.envelope, self.grid).c1
        sp = mollifier_service.build_smoothed(self.model, "linfty", 0.1, 1.0, self.grid)

        # Act
        report = mollifier_service.verify_mollifier_bounds(sp, self._certificate(c1), self.envelope)

        # Assert
        assert report.passes is True
        assert report.max_ratio_R == pytest.approx(1.0)
        assert report.sup_envelope_ok is True

    def test_halved_constant_fails_and_logs(self, mollifier_service, potential_service):
        # Arrange
        c1 = potential_service.check_linfty_decay(self.model, self.envelope, self.grid).c1
        sp = mollifier_service.build_smoothed(self.model, "linfty", 0.1, 1.0, self.grid)

        # Act
        with patch("carleman_lab.services.mollifier.logger") as mock_logger:
            report = mollifier_service.verify_mollifier_bounds(sp, self._certificate(0.5 * c1), self.envelope)

        # Assert
        assert report.passes is False
        assert report.max_ratio_R == pytest.approx(2.0)
        mock_logger.warning.assert_called_once()


class TestHolderScaling:
    def setup_method(self):
        self.envelope = EnvelopeFactory("log_decay")
        self.model = PotentialModelFactory("sawtooth_holder", "radial", envelope=self.envelope, alpha=0.5, tau=0.5)
        self.certificate = ClassCertificate(
            condition="holder_radial", alpha=0.5, c_const=1.0, V_infty=0.0, delta_V=1.0, R_EV=2.0, E=1.0, E_infty=0.0,
        )
        self.rho = 2.0 / 3.5
        # lattice points carry the cusps of the sawtooth
        self.grid = 0.5 * np.arange(1.0, 7.0)

    def test_weighted_remainder_scales_like_gamma_to_alpha(self, mollifier_service):
        # Arrange
        h_values = np.array([1e-2, 1e-3, 1e-4, 1e-5])

        # Act
        remainders = [
            mollifier_service.verify_mollifier_bounds(
                mollifier_service.build_smoothed(self.model, "holder_radial", h, self.rho, self.grid),
                self.certificate, self.envelope,
            ).max_weighted_R
            for h in h_values
        ]
        slope = np.polyfit(np.log(h_values), np.log(remainders), 1)[0]

        # Assert
        assert slope == pytest.approx(self.rho * 0.5, abs=0.1)

    @pytest.mark.parametrize("h", [1e-2, 1e-4])
    def test_smoothed_value_below_windowed_sup(self, mollifier_service, h):
        # Arrange
        grid = np.concatenate([self.grid, np.linspace(0.05, 3.0, 37)])
        sp = mollifier_service.build_smoothed(self.model, "holder_radial", h, self.rho, grid)
        offsets = np.linspace(0.0, sp.gamma, 4001)

        # Act
        sup = evaluate(self.model, grid[:, None] + offsets[None, :]).max(axis=1)

        # Assert
        assert np.all(sp.Vh <= sup + 1e-10)
