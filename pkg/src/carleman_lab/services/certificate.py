import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from carleman_lab.config import MULTIPLIER_STABILITY_TOL
from carleman_lab.models.grids import (
    CarlemanReport,
    ConjugationCoefficients,
    PhaseWeightProfile,
    SmoothedPotential,
    TestFunction,
)
from carleman_lab.schemas.reports import IntegratedCarlemanReport, StabilityReport

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

CHAIN_RTOL = 1e-9


class GridMismatchError(Exception):
    """Raised when profile, smoothed potential and test function live on different grids."""
    pass


def _same_grid(left: Array, right: Array) -> bool:
    return left.shape == right.shape and bool(np.array_equal(left, right))


def _derivative(values: np.ndarray, grid: Array) -> np.ndarray:
    """Second-order derivative on a possibly non-uniform grid; duplicated nodes share a value."""
    unique, first, inverse = np.unique(grid, return_index=True, return_inverse=True)
    if unique.size < 3:
        raise GridMismatchError("at least three distinct grid nodes are needed for differencing")
    return np.gradient(values[first], unique, edge_order=2)[inverse]


def _centrifugal(coefficients: ConjugationCoefficients, mode_lambda: float) -> Array:
    if coefficients.dimension_mode == "line" or mode_lambda == 0.0:
        return np.zeros_like(coefficients.grid)
    return coefficients.h ** 2 * mode_lambda / coefficients.grid ** 2


class CertificateService:
    """Pointwise and integrated certification of the Carleman estimate for a constructed profile."""

    def __init__(self, chain_rtol: float = CHAIN_RTOL):
        self.chain_rtol = chain_rtol

    def _check_grids(self, profile: PhaseWeightProfile, smoothed: SmoothedPotential) -> None:
        if not _same_grid(profile.grid, smoothed.grid):
            raise GridMismatchError(
                f"profile grid ({profile.grid.size} points) and smoothed grid ({smoothed.grid.size} points) differ"
            )

    def _check_function(self, u: TestFunction, grid: Array) -> None:
        if not _same_grid(u.grid, grid):
            raise GridMismatchError(f"test function grid ({u.grid.size} points) differs from the profile grid")

    # pointwise

    def compute_AB(
        self, profile: PhaseWeightProfile, smoothed: SmoothedPotential, E: float,
    ) -> Tuple[Array, Array]:
        """A and B divided by w'.

        A/w' = E + phi'^2 - V_h + W (2 phi' phi'' - V_h'),
        B/w' = W^2 (|R_h|/h + phi'')^2 / (1 + 4 phi' W / h), with W = w/w'.
        """
        self._check_grids(profile, smoothed)
        h = profile.params.h
        Wcal = profile.w_over_w_prime
        phi_p = profile.phi_prime
        phi_pp = profile.phi_second
        A = E + phi_p ** 2 - smoothed.Vh + Wcal * (2.0 * phi_p * phi_pp - smoothed.Vh_prime)
        B = Wcal ** 2 * (np.abs(smoothed.R_h) / h + phi_pp) ** 2 / (1.0 + 4.0 * phi_p * Wcal / h)
        return A, B

    def keycalc_bracket(self, profile: PhaseWeightProfile, smoothed: SmoothedPotential, E: float, K: float) -> Array:
        """Analytic lower bound of A - (K/2)B per unit w'."""
        self._check_grids(profile, smoothed)
        h = profile.params.h
        Wcal = profile.w_over_w_prime
        phi_p = profile.phi_prime
        Phi = profile.Phi
        branch = np.minimum(Wcal, h / (4.0 * phi_p))
        return (
            E
            + phi_p ** 2 * (1.0 + 2.0 * Wcal * Phi - K * Wcal * Phi ** 2 * branch)
            - smoothed.Vh
            - Wcal * smoothed.Vh_prime
            - K * Wcal * (smoothed.R_h / h) ** 2 * branch
        )

    def key_margin(
        self, profile: PhaseWeightProfile, smoothed: SmoothedPotential, E: float, E_infty: float, K: float,
    ) -> CarlemanReport:
        A, B = self.compute_AB(profile, smoothed, E)
        bracket = self.keycalc_bracket(profile, smoothed, E, K)
        target = 0.5 * E if profile.params.case == "linfty" else 0.5 * (E - E_infty)
        lhs = A - 0.5 * K * B
        margin = lhs - target
        # both copies of a duplicated node are one-sided limits and are certified
        certified = np.isfinite(margin) & np.isfinite(bracket)
        if np.all(certified):
            index = int(np.argmin(margin))
            min_margin = float(margin[index])
        else:
            index = int(np.argmax(~certified))
            min_margin = float("-inf")
            logger.warning(
                f"Non-finite margin at h={profile.params.h}: {int(np.count_nonzero(~certified))} nodes, "
                f"first at r={profile.grid[index]:.6g}"
            )
        scale = np.maximum(1.0, np.abs(A) + 0.5 * K * np.abs(B))
        chain_algebra_holds = bool(np.all(certified) and np.all(lhs - bracket >= -self.chain_rtol * scale))
        bracket_ge_target = bool(np.all(certified) and np.all(bracket >= target))
        report = CarlemanReport(
            params=profile.params,
            grid=profile.grid,
            A_per_wprime=A,
            B_per_wprime=B,
            bracket=bracket,
            target_per_wprime=target,
            certified=certified,
            min_margin=min_margin,
            argmin=float(profile.grid[index]),
            chain_algebra_holds=chain_algebra_holds,
            bracket_ge_target=bracket_ge_target,
            psi=profile.psi,
        )
        if not chain_algebra_holds:
            logger.warning(f"A - (K/2)B fell below the analytic bracket at h={profile.params.h}")
        logger.debug(f"Key margin at h={profile.params.h}: {report.min_margin:.4e} at r={report.argmin:.6g}")
        return report

    # energy identities

    def energy_functional(
        self, u: TestFunction, profile: PhaseWeightProfile, smoothed: SmoothedPotential, E: float,
        mode_lambda: float = 0.0,
    ) -> Array:
        """F = |hu'|^2 - (h^2 lambda/r^2 + V_h - phi'^2 - E)|u|^2."""
        self._check_grids(profile, smoothed)
        self._check_function(u, profile.grid)
        coefficients = ConjugationCoefficients.from_profile(profile)
        h = coefficients.h
        q = _centrifugal(coefficients, mode_lambda) + smoothed.Vh - coefficients.phi_prime ** 2 - E
        return np.abs(h * u.u_prime) ** 2 - q * np.abs(u.u) ** 2

    def conjugated_apply(
        self,
        u: TestFunction,
        coefficients: Union[ConjugationCoefficients, PhaseWeightProfile],
        V: Array,
        E: float,
        eps: float,
        sign: int = 1,
        mode_lambda: float = 0.0,
    ) -> ComplexArray:
        """-h^2 u'' + 2h phi' u' + h^2 lambda/r^2 u + (V - phi'^2 + h phi'' - E +/- i eps) u."""
        if isinstance(coefficients, PhaseWeightProfile):
            coefficients = ConjugationCoefficients.from_profile(coefficients)
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        self._check_function(u, coefficients.grid)
        h = coefficients.h
        u_second = _derivative(u.u_prime, coefficients.grid)
        potential = (
            _centrifugal(coefficients, mode_lambda) + V - coefficients.phi_prime ** 2
            + h * coefficients.phi_second - E + 1j * sign * eps
        )
        return -h ** 2 * u_second + 2.0 * h * coefficients.phi_prime * u.u_prime + potential * u.u

    def _identity_mask(self, profile: PhaseWeightProfile) -> NDArray[np.bool_]:
        grid = profile.grid
        mask = np.ones(grid.size, dtype=bool)
        mask[:2] = False
        mask[-2:] = False
        # phi'' jumps at a (radial) and at 0 (line); skip the nodes whose stencil crosses it
        kink = 0.0 if profile.params.case == "holder_1d" else profile.params.a
        nearest = np.argsort(np.abs(grid - kink), kind="stable")[:4]
        mask[nearest] = False
        return mask

    def wF_derivative_identity(
        self,
        u: TestFunction,
        profile: PhaseWeightProfile,
        smoothed: SmoothedPotential,
        E: float,
        eps: float,
        sign: int = 1,
        mode_lambda: float = 0.0,
    ) -> float:
        """Max relative gap between differenced (wF)' and its expanded form over interior nodes."""
        self._check_grids(profile, smoothed)
        self._check_function(u, profile.grid)
        h = profile.params.h
        grid = profile.grid
        w, w_prime = profile.w, profile.w_prime
        phi_p, phi_pp = profile.phi_prime, profile.phi_second
        F = self.energy_functional(u, profile, smoothed, E, mode_lambda)
        lhs = _derivative(w * F, grid)

        Pu = self.conjugated_apply(u, profile, smoothed.V, E, eps, sign, mode_lambda)
        u_bar_prime = np.conj(u.u_prime)
        abs_u2 = np.abs(u.u) ** 2
        rhs = (
            -2.0 * np.real(w * Pu * u_bar_prime)
            - sign * 2.0 * eps * w * np.imag(u.u * u_bar_prime)
            + (4.0 * w * phi_p / h + w_prime) * np.abs(h * u.u_prime) ** 2
            + (w_prime * (E + phi_p ** 2 - smoothed.Vh) + w * (2.0 * phi_p * phi_pp - smoothed.Vh_prime)) * abs_u2
            + 2.0 * w * np.real((smoothed.R_h + h * phi_pp) * u.u * u_bar_prime)
        )
        if profile.params.case != "holder_1d" and mode_lambda != 0.0:
            rhs = rhs + (2.0 * w / grid - w_prime) * h ** 2 * mode_lambda / grid ** 2 * abs_u2

        mask = self._identity_mask(profile)
        scale = float(np.max(np.abs(lhs[mask]))) if np.any(mask) else 0.0
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(lhs - rhs)[mask]) / scale)

    # integrated form

    def int_by_parts_residual(self, u: TestFunction, coefficients: ConjugationCoefficients) -> float:
        """Relative size of int h phi''|u|^2 + Re int 2h phi' u' conj(u)."""
        self._check_function(u, coefficients.grid)
        h = coefficients.h
        grid = coefficients.grid
        first = integrate.trapezoid(h * coefficients.phi_second * np.abs(u.u) ** 2, grid)
        second = integrate.trapezoid(np.real(2.0 * h * coefficients.phi_prime * u.u_prime * np.conj(u.u)), grid)
        scale = max(abs(first), abs(second))
        return 0.0 if scale == 0.0 else float(abs(first + second) / scale)

    def integrated_carleman_check(
        self,
        u_samples: Sequence[TestFunction],
        profile: PhaseWeightProfile,
        smoothed: SmoothedPotential,
        E: float,
        eps: float,
        sign: int = 1,
        eta: Optional[float] = None,
        mode_lambda: float = 0.0,
        precondition_met: bool = True,
    ) -> IntegratedCarlemanReport:
        """Smallest multiplier making
        int (r+1)^(-1-eta)(|u|^2 + |hu'|^2) <= M [int (1+r)^(1+eta)|P u|^2 + eps int |u|^2]
        hold for every sample.
        """
        self._check_grids(profile, smoothed)
        if not u_samples:
            raise ValueError("integrated_carleman_check needs at least one test function")
        eta = profile.params.eta if eta is None else eta
        h = profile.params.h
        grid = profile.grid
        bracket = np.abs(grid) + 1.0
        lhs, rhs, multipliers = [], [], []
        for u in u_samples:
            Pu = self.conjugated_apply(u, profile, smoothed.V, E, eps, sign, mode_lambda)
            left = integrate.trapezoid(bracket ** (-1.0 - eta) * (np.abs(u.u) ** 2 + np.abs(h * u.u_prime) ** 2), grid)
            right = integrate.trapezoid(bracket ** (1.0 + eta) * np.abs(Pu) ** 2, grid)
            right += eps * integrate.trapezoid(np.abs(u.u) ** 2, grid)
            lhs.append(float(left))
            rhs.append(float(right))
            multipliers.append(float(left / right) if right > 0.0 else float("inf"))
        max_multiplier = max(multipliers)
        if not precondition_met:
            logger.warning(f"Integrated check at h={h} runs on a profile whose key margin failed")
        return IntegratedCarlemanReport(
            h=h,
            eps=eps,
            sign=sign,
            lhs=lhs,
            rhs=rhs,
            multipliers=multipliers,
            max_multiplier=max_multiplier,
            log_multiplier_times_h=float(h * np.log(max_multiplier)) if max_multiplier > 0.0 else float("-inf"),
            precondition_met=precondition_met,
        )

    @staticmethod
    def multiplier_stability(
        reports: Sequence[IntegratedCarlemanReport], tol: float = MULTIPLIER_STABILITY_TOL,
    ) -> StabilityReport:
        """Spread of h log(multiplier) across an h-sweep; stable when the spread is within tol."""
        key = "log_multiplier_times_h"
        series = [report.log_multiplier_times_h for report in sorted(reports, key=lambda r: -r.h)]
        top = max((abs(v) for v in series), default=0.0)
        spread = 0.0 if top == 0.0 else (max(series) - min(series)) / top
        return StabilityReport(values={key: series}, spread={key: spread}, stable={key: spread <= tol})
