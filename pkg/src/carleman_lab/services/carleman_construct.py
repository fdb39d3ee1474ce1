import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate, stats

from carleman_lab.config import (
    CONSTANT_STABILITY_TOL,
    DEFAULT_K,
    PHI_GROWTH_TOL,
    PROFILE_XCHECK_RTOL,
    QUAD_ORDER,
)
from carleman_lab.models.envelopes import envelope_values, floor_m0
from carleman_lab.models.grids import PhaseWeightDraft, PhaseWeightProfile, SmoothedPotential
from carleman_lab.models.kernels import omega, psi
from carleman_lab.schemas.construction import CaseKind, ConstructionParams
from carleman_lab.schemas.potential import ClassCertificate, EnvelopeFn, PotentialModel
from carleman_lab.schemas.reports import LemmaPhiReport, PhiGrowthReport, ProfileBoundReport, StabilityReport
from carleman_lab.services.certificate import CertificateService
from carleman_lab.services.mollifier import MollifierService

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

BOUND_RTOL = 1e-9
TAU0_LADDER = [2.0 ** k for k in range(11)]
A0_LADDER = [2.0 ** k for k in range(9)]
DELTA_LADDER = [2.0 ** -k for k in range(13)]
# omega switches off on [1/2, 3/4]; extra knots keep the panels there short
CUTOFF_SPLITS = list(np.linspace(0.5, 0.75, 17))


class ConstructionError(Exception):
    """Raised when phase/weight construction inputs are invalid."""
    pass


class IntegrationCrossCheckError(Exception):
    """Raised when integrated profiles disagree with their closed forms."""

    def __init__(self, message: str, location: float):
        super().__init__(message)
        self.location = location


class ConstructionSearchError(Exception):
    """Raised when the constant ladders are exhausted without a nonnegative margin."""

    def __init__(self, message: str, worst_margin: float, worst_location: float):
        super().__init__(message)
        self.worst_margin = worst_margin
        self.worst_location = worst_location


def sigma_rho(alpha: float) -> Tuple[float, float]:
    """sigma = (1 - alpha)/(3 + alpha), rho = 2/(3 + alpha)."""
    if not 0.0 <= alpha <= 1.0:
        raise ConstructionError(f"alpha must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) / (3.0 + alpha), 2.0 / (3.0 + alpha)


def radial_grid(a: float, n: int = 2000, r_min: float = 1e-4, r_max: Optional[float] = None) -> Tuple[Array, int]:
    """Geometric on (r_min, 1/2], uniform beyond, with forced nodes at 1/2, 3/4, 1 and a.

    The node a appears twice; the second copy carries right limits. Returns the grid and
    the index of the first copy.
    """
    r_max = max(4.0 * a, 8.0) if r_max is None else r_max
    if r_max <= a:
        raise ConstructionError(f"r_max={r_max} must exceed a={a}")
    inner = np.geomspace(r_min, 0.5, max(n // 5, 10))
    outer = np.linspace(0.5, r_max, max(n - n // 5, 10))
    grid = np.unique(np.concatenate([inner, outer, [0.75, 1.0, a]]))
    jump = int(np.searchsorted(grid, a))
    return np.insert(grid, jump, a), jump


def tau0_reference(certificate: ClassCertificate) -> float:
    """One-dimensional reference scale sqrt(max(C_V, 1)) (R_E + 2)^4."""
    return float(np.sqrt(max(certificate.C_V, 1.0)) * (certificate.R_EV + 2.0) ** 4)


def line_grid(L: float, n: int = 2001) -> Array:
    n = n if n % 2 == 1 else n + 1
    return np.linspace(-L, L, n)


class CarlemanConstructionService:
    """Phase and weight construction from Phi and W, with bound checks and the constant search."""

    def __init__(
        self,
        xcheck_rtol: float = PROFILE_XCHECK_RTOL,
        check_nodes: int = 64,
        order: int = QUAD_ORDER,
        certificate_service: Optional[CertificateService] = None,
        mollifier_service: Optional[MollifierService] = None,
    ):
        self.xcheck_rtol = xcheck_rtol
        self.check_nodes = check_nodes
        self.nodes, self.weights = np.polynomial.legendre.leggauss(order)
        self.certificate_service = certificate_service or CertificateService()
        self.mollifier_service = mollifier_service or MollifierService()

    # Phi and W

    def build_Phi_W_radial(
        self, params: ConstructionParams, envelope: EnvelopeFn, grid: Optional[Array] = None,
        n: int = 2000, R_E: float = 0.0,
    ) -> PhaseWeightDraft:
        """Phi, W, Phi1 on (0, a] (inner formulas) and (a, infinity) (outer formulas)."""
        if params.case == "holder_1d":
            raise ConstructionError("build_Phi_W_radial needs a radial case")
        a, eta = params.a, params.eta
        if grid is None:
            grid, jump = radial_grid(a, n)
        else:
            grid = np.asarray(grid, dtype=float)
            jump = None
        if np.any(grid <= 0.0):
            raise ConstructionError("radial grids must be positive")

        def m_squared(r: Array) -> Array:
            m2 = envelope_values(envelope, r) ** 2
            if np.any(m2 >= 4.0):
                raise ConstructionError("m^2 >= 4 makes Phi1 singular")
            return m2

        def phi1_inner(r: Array) -> Array:
            m2 = m_squared(r)
            return np.maximum(((r + 1.0) * m2 + 4.0 * r * omega(r) - 4.0) / (4.0 - m2), 0.0)

        def Phi1_fn(r: Array) -> Array:
            r = np.asarray(r, dtype=float)
            return np.where(r <= a, phi1_inner(r), 0.0)

        def Phi_fn(r: Array) -> Array:
            r = np.asarray(r, dtype=float)
            return np.where(r <= a, -1.0 / (r + 1.0 + phi1_inner(r)), -(1.0 + eta) / (r + 1.0))

        def Wcal_fn(r: Array) -> Array:
            r = np.asarray(r, dtype=float)
            return np.where(r <= a, 0.5 * r * (1.0 + omega(r)), 0.5 * (r + 1.0) ** (1.0 + eta))

        inner = np.arange(grid.size) <= jump if jump is not None else grid <= a
        Phi1 = np.where(inner, phi1_inner(grid), 0.0)
        Phi = np.where(inner, -1.0 / (grid + 1.0 + phi1_inner(grid)), -(1.0 + eta) / (grid + 1.0))
        Wcal = np.where(inner, 0.5 * grid * (1.0 + omega(grid)), 0.5 * (grid + 1.0) ** (1.0 + eta))
        return PhaseWeightDraft(
            params=params, grid=grid, Phi=Phi, Wcal=Wcal, Phi1=Phi1,
            Phi_fn=Phi_fn, Wcal_fn=Wcal_fn, Phi1_fn=Phi1_fn, R_E=R_E, jump_index=jump,
        )

    def build_Phi_W_1d(
        self, params: ConstructionParams, m0: EnvelopeFn, grid: Optional[Array] = None,
        n: int = 2001, R_E: float = 0.0,
    ) -> PhaseWeightDraft:
        """Phi = -2 sgn(x)/(|x|+1) (right limit at 0), W = delta h / m0 with m0 floored."""
        if params.delta is None or params.delta <= 0.0 or params.h <= 0.0:
            raise ConstructionError("one-dimensional construction needs delta > 0 and h > 0")
        if grid is None:
            grid = line_grid(max(2.0 * (R_E + 2.0), 10.0), n)
        grid = np.asarray(grid, dtype=float)
        scale = params.delta * params.h

        def m0_fn(x: Array) -> Array:
            return np.maximum(envelope_values(m0, x), floor_m0(x))

        def Phi_fn(x: Array) -> Array:
            x = np.asarray(x, dtype=float)
            return -2.0 * np.where(x >= 0.0, 1.0, -1.0) / (np.abs(x) + 1.0)

        def Wcal_fn(x: Array) -> Array:
            return scale / m0_fn(x)

        return PhaseWeightDraft(
            params=params, grid=grid, Phi=Phi_fn(grid), Wcal=Wcal_fn(grid), Phi1=np.zeros_like(grid),
            Phi_fn=Phi_fn, Wcal_fn=Wcal_fn, Phi1_fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            R_E=R_E, jump_index=None, m0_fn=m0_fn,
        )

    # integration

    def _cumulative(self, fn: Callable[[Array], Array], start: float, points: Array, splits: Sequence[float]) -> Array:
        """Integral of fn from start to each point by composite Gauss-Legendre between knots."""
        lo, hi = min(start, float(points.min())), max(start, float(points.max()))
        extra = [s for s in splits if lo < s < hi]
        knots = np.unique(np.concatenate([points, [start], extra]))
        left, right = knots[:-1], knots[1:]
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        samples = fn(mid[:, None] + half[:, None] * self.nodes[None, :])
        increments = half * (samples @ self.weights)
        running = np.concatenate([[0.0], np.cumsum(increments)])
        at_start = running[np.searchsorted(knots, start)]
        return running[np.searchsorted(knots, points)] - at_start

    def _tail_integral(self, fn: Callable[[Array], Array], L: float) -> float:
        # r = e^t turns the slowly decaying tail into an integrable one
        value, _ = integrate.quad(lambda t: float(np.exp(t) * fn(np.exp(t))), np.log(L), np.inf, limit=500)
        return value

    def integrate_profiles(self, draft: PhaseWeightDraft, cross_check: bool = True) -> PhaseWeightProfile:
        params = draft.params
        grid = draft.grid
        tau0 = params.tau0
        log_tau0 = np.log(tau0)

        if params.case == "holder_1d":
            scale = params.delta * params.h
            L = float(np.max(np.abs(grid)))
            log_phi0_prime = log_tau0 + self._cumulative(draft.Phi_fn, 0.0, grid, [])
            head, _ = integrate.quad(lambda s: float(draft.m0_fn(s)), 0.0, L, limit=500)
            total = head + self._tail_integral(draft.m0_fn, L)
            log_w = (-total + self._cumulative(draft.m0_fn, 0.0, grid, [])) / scale
            log_w_prime = log_w - np.log(draft.Wcal)
        else:
            a = params.a
            log_phi0_prime = log_tau0 + self._cumulative(draft.Phi_fn, 0.0, grid, [*CUTOFF_SPLITS, a])
            log_w = np.empty_like(grid)
            small = grid <= 0.5
            log_w[small] = np.log(grid[small])
            if np.any(~small):
                log_w[~small] = np.log(0.5) + self._cumulative(
                    lambda r: 1.0 / draft.Wcal_fn(r), 0.5, grid[~small], [*CUTOFF_SPLITS, a]
                )
            log_w_prime = log_w - np.log(draft.Wcal)

        phi0_prime = np.exp(log_phi0_prime)
        phi0 = self._antiderivative(grid, phi0_prime)

        profile = PhaseWeightProfile(
            params=params,
            grid=grid,
            Phi=draft.Phi,
            Wcal=draft.Wcal,
            Phi1=draft.Phi1,
            phi0_prime=phi0_prime,
            phi0=phi0,
            log_w=log_w,
            log_w_prime=log_w_prime,
            log_shift=float(log_w.max()),
            omega=omega(grid) if params.case != "holder_1d" else np.zeros_like(grid),
            psi=psi(grid, draft.R_E),
            R_E=draft.R_E,
            jump_index=draft.jump_index,
        )
        if not cross_check:
            return profile
        error = self._cross_check(draft, profile)
        return PhaseWeightProfile(**{**profile.__dict__, "xcheck_max_error": error})

    def _antiderivative(self, grid: Array, values: Array) -> Array:
        """Antiderivative vanishing at 0 (continuous across duplicated nodes)."""
        unique, index = np.unique(grid, return_index=True)
        if unique[0] > 0.0:
            x = np.concatenate([[0.0], unique])
            y = np.concatenate([[values[index[0]]], values[index]])
        else:
            x, y = unique, values[index]
        running = integrate.cumulative_simpson(y, x=x, initial=0.0)
        running = running - np.interp(0.0, x, running)
        return np.interp(grid, x, running)

    def _cross_check(self, draft: PhaseWeightDraft, profile: PhaseWeightProfile) -> float:
        """Compare against closed forms and independent adaptive quadrature at sampled nodes."""
        params = draft.params
        grid = draft.grid
        picks = np.unique(np.linspace(0, grid.size - 1, self.check_nodes).astype(int))
        if draft.jump_index is not None:
            picks = picks[picks != draft.jump_index + 1]
        worst, worst_at = 0.0, float(grid[picks[0]])

        def compare(node: float, numeric: float, reference: float) -> None:
            nonlocal worst, worst_at
            error = abs(numeric - reference) / max(1.0, abs(reference))
            if error > worst:
                worst, worst_at = error, node

        if params.case == "holder_1d":
            scale = params.delta * params.h
            L = float(np.max(np.abs(grid)))
            tail = self._tail_integral(draft.m0_fn, L)
            for i in picks:
                x = float(grid[i])
                compare(x, np.log(profile.phi0_prime[i]), np.log(params.tau0) - 2.0 * np.log(abs(x) + 1.0))
                right, _ = integrate.quad(lambda s: float(draft.m0_fn(s)), x, L, points=[0.0] if x < 0 else None, limit=500)
                compare(x, profile.log_w[i], -(right + tail) / scale)
        else:
            a, eta = params.a, params.eta
            fn_phi = lambda s: float(draft.Phi_fn(s))
            fn_inv_w = lambda s: float(1.0 / draft.Wcal_fn(s))
            ordered = np.sort(grid[picks])
            nodes = np.concatenate([[0.0], ordered[ordered <= a], [a]])
            phi_int = np.concatenate([[0.0], np.cumsum([
                integrate.quad(fn_phi, lo, hi, points=[p for p in (0.5, 0.75) if lo < p < hi] or None,
                               epsabs=0.0, epsrel=1e-12, limit=200)[0]
                for lo, hi in zip(nodes[:-1], nodes[1:])
            ])])
            log_phi_a = np.log(params.tau0) + phi_int[-1]
            w_knots = np.concatenate([[0.5], nodes[nodes > 0.5]])
            if w_knots[-1] < a:
                w_knots = np.concatenate([w_knots, [a]])
            w_int = np.concatenate([[0.0], np.cumsum([
                integrate.quad(fn_inv_w, lo, hi, points=[0.75] if lo < 0.75 < hi else None,
                               epsabs=0.0, epsrel=1e-12, limit=200)[0]
                for lo, hi in zip(w_knots[:-1], w_knots[1:])
            ])])
            log_w_a = np.log(0.5) + w_int[-1]
            for i in picks:
                r = float(grid[i])
                inner = r <= a if draft.jump_index is None else i <= draft.jump_index
                if inner:
                    compare(r, np.log(profile.phi0_prime[i]), np.log(params.tau0) + phi_int[np.searchsorted(nodes, r)])
                    if r <= 0.5:
                        reference_w = np.log(r)
                    else:
                        reference_w = np.log(0.5) + w_int[np.searchsorted(w_knots, r)]
                else:
                    compare(r, np.log(profile.phi0_prime[i]), log_phi_a + (1.0 + eta) * np.log((a + 1.0) / (r + 1.0)))
                    reference_w = log_w_a + (2.0 / eta) * ((a + 1.0) ** -eta - (r + 1.0) ** -eta)
                compare(r, profile.log_w[i], reference_w)

        if worst > self.xcheck_rtol:
            logger.error(f"Profile cross-check mismatch {worst:.3e} at {worst_at:.6g}")
            raise IntegrationCrossCheckError(
                f"Integrated profile differs from closed form by {worst:.3e} at {worst_at:.6g}", location=worst_at
            )
        logger.debug(f"Profile cross-check passed with max relative error {worst:.3e}")
        return worst

    # checks

    def lemma_phi_check(self, Phi1: Array, grid: Array) -> LemmaPhiReport:
        """-log(r+1) <= int_0^r Phi <= -log(r+1) + ||(s+1)^-2 Phi1||_1 with Phi = -1/(s+1+Phi1)."""
        grid = np.asarray(grid, dtype=float)
        Phi1 = np.asarray(Phi1, dtype=float)
        if np.any(Phi1 < 0.0):
            raise ConstructionError("Phi1 must be nonnegative")
        x = np.concatenate([[0.0], grid]) if grid[0] > 0.0 else grid
        p1 = np.concatenate([[Phi1[0]], Phi1]) if grid[0] > 0.0 else Phi1
        # int Phi = -log(r+1) + int Phi1/((s+1)(s+1+Phi1)); the log part is exact
        slack = integrate.cumulative_trapezoid(p1 / ((x + 1.0) * (x + 1.0 + p1)), x, initial=0.0)
        bound = integrate.cumulative_trapezoid(p1 / (x + 1.0) ** 2, x, initial=0.0)
        int_Phi = -np.log(x + 1.0) + slack
        lower_violation = float(np.max(np.maximum(-np.log(x + 1.0) - int_Phi, 0.0)))
        norm = float(bound[-1])
        upper_violation = float(np.max(np.maximum(int_Phi - (-np.log(x + 1.0) + norm), 0.0)))
        passes = lower_violation <= 1e-12 and upper_violation <= 1e-12
        return LemmaPhiReport(
            passes=passes, l1_norm=norm, max_slack=float(slack.max()),
            lower_violation=lower_violation, upper_violation=upper_violation,
        )

    def phi1_norm(self, profile: PhaseWeightProfile) -> float:
        r = profile.grid
        inner = r <= profile.params.a
        x = np.concatenate([[0.0], r[inner]])
        y = np.concatenate([[profile.Phi1[0]], profile.Phi1[inner]]) / (x + 1.0) ** 2
        return float(integrate.trapezoid(y, x))

    def phi_max_check(self, profile: PhaseWeightProfile) -> Tuple[bool, float]:
        """max|phi0| <= tau0 e^N [log(a+1) + 1/eta]; returns the pass flag and the ratio."""
        params = profile.params
        N = self.phi1_norm(profile)
        bound = params.tau0 * np.exp(N) * (np.log(params.a + 1.0) + 1.0 / params.eta)
        ratio = float(np.max(np.abs(profile.phi0)) / bound)
        return ratio <= 1.0 + 1e-6, ratio

    def verify_profile_bounds(self, profile: PhaseWeightProfile) -> ProfileBoundReport:
        params = profile.params
        r = profile.grid
        checks: Dict[str, bool] = {}
        constants: Dict[str, float] = {}
        eta, tau0, h = params.eta, params.tau0, params.h
        w_prime_positive = bool(np.all(np.isfinite(profile.log_w_prime)))
        phi_prime_positive = bool(np.all(profile.phi0_prime > 0.0))
        checks["positivity"] = w_prime_positive and phi_prime_positive

        if params.case == "holder_1d":
            x = np.abs(r)
            phi = profile.phi
            closed = tau0 * np.sign(r) * (1.0 - 1.0 / (x + 1.0))
            checks["phi_bounded"] = bool(np.max(np.abs(phi)) <= tau0 * (1.0 + 1e-8))
            constants["phi_sup"] = float(np.max(np.abs(phi)))
            constants["phi_closed_form_error"] = float(np.max(np.abs(phi - closed)))
            checks["w_le_1"] = bool(np.all(profile.log_w <= BOUND_RTOL))
            constants["w_max"] = float(np.exp(profile.log_w.max()))
            # w' >= C e^{-C/h} (|x|+1)^(-1-eta): report the C in the exponent
            log_lower = profile.log_w_prime + (1.0 + eta) * np.log(x + 1.0)
            constants["C_w_prime_exponent"] = float(-h * log_lower.min())
            w2_over_wprime = np.exp(2.0 * profile.log_w - profile.log_w_prime)
            constants["C_w2_over_wprime"] = float(np.max(w2_over_wprime / (x + 1.0) ** (1.0 + eta)))
            checks["w2_over_wprime_finite"] = bool(np.isfinite(constants["C_w2_over_wprime"]))
        else:
            a = params.a
            inner = r <= a if profile.jump_index is None else np.arange(r.size) <= profile.jump_index
            N = self.phi1_norm(profile)
            lower = tau0 / (r + 1.0)
            upper = tau0 * np.exp(N) / (r + 1.0)
            checks["phi0_prime_bounds"] = bool(
                np.all(profile.phi0_prime[inner] >= lower[inner] * (1.0 - BOUND_RTOL))
                and np.all(profile.phi0_prime[inner] <= upper[inner] * (1.0 + BOUND_RTOL))
            )
            outer_lower = tau0 * (a + 1.0) ** eta / (r + 1.0) ** (1.0 + eta)
            checks["phi0_prime_outer_bounds"] = bool(
                np.all(profile.phi0_prime[~inner] >= outer_lower[~inner] * (1.0 - BOUND_RTOL))
                and np.all(profile.phi0_prime[~inner] <= np.exp(N) * outer_lower[~inner] * (1.0 + BOUND_RTOL))
            )
            checks["weight_condition"] = bool(np.all(profile.Wcal >= 0.5 * r * (1.0 - BOUND_RTOL)))
            log_w_cap = np.log(2.0 * a * a) + (2.0 / eta) * (a + 1.0) ** -eta
            checks["w_lemma_bound"] = bool(np.all(profile.log_w <= log_w_cap + BOUND_RTOL))
            checks["w_prime_lower"] = bool(
                np.all(profile.log_w_prime >= -(1.0 + eta) * np.log(r + 1.0) - BOUND_RTOL)
            )
            two_M = 2.0 * params.M
            constants["C_w"] = float(np.exp(profile.log_w.max()) * h ** two_M)
            log_w2_over_wprime = 2.0 * profile.log_w - profile.log_w_prime
            constants["C_w2_over_wprime"] = float(
                np.exp(np.max(log_w2_over_wprime - (1.0 + eta) * np.log(1.0 + r))) * h ** two_M
            )
            constants["w_prime_lower_min"] = float(
                np.exp(np.min(profile.log_w_prime + (1.0 + eta) * np.log(r + 1.0)))
            )
            phi_ok, ratio = self.phi_max_check(profile)
            checks["phi_max"] = phi_ok
            constants["phi_max_ratio"] = ratio
            constants["phi1_norm"] = N

        passes = all(checks.values())
        if not passes:
            failed = [name for name, ok in checks.items() if not ok]
            logger.warning(f"Profile bounds failed at h={h}: {failed}")
        return ProfileBoundReport(case=params.case, h=h, passes=passes, checks=checks, constants=constants)

    @staticmethod
    def constant_stability(
        reports: Sequence[ProfileBoundReport], tol: float = CONSTANT_STABILITY_TOL,
    ) -> StabilityReport:
        """Spread (max - min)/max|value| of every reported constant across an h-sweep."""
        keys = sorted(set().union(*(report.constants.keys() for report in reports))) if reports else []
        values: Dict[str, List[float]] = {}
        spread: Dict[str, float] = {}
        stable: Dict[str, bool] = {}
        for key in keys:
            series = [report.constants[key] for report in reports if key in report.constants]
            values[key] = series
            top = max(abs(v) for v in series)
            spread[key] = 0.0 if top == 0.0 else (max(series) - min(series)) / top
            stable[key] = spread[key] <= tol
        return StabilityReport(values=values, spread=spread, stable=stable)

    def phi_growth_check(
        self, profiles: Sequence[PhaseWeightProfile], tol: float = PHI_GROWTH_TOL,
    ) -> PhiGrowthReport:
        """Fit max|phi0|/tau0 = c log(1/h) + b over a radial h-sweep and compare c with M."""
        if any(profile.params.case == "holder_1d" for profile in profiles):
            raise ConstructionError("phase growth in log(1/h) is only defined for the radial cases")
        shapes = {(profile.params.alpha, profile.params.eta) for profile in profiles}
        if len(shapes) > 1:
            raise ConstructionError(f"profiles mix (alpha, eta) pairs: {sorted(shapes)}")
        ordered = sorted(profiles, key=lambda profile: -profile.params.h)
        h_values = [profile.params.h for profile in ordered]
        if len(set(h_values)) < 3:
            raise ConstructionError(f"phase growth fit needs at least three h values, got {len(set(h_values))}")

        phi0_max = [float(np.max(np.abs(profile.phi0)) / profile.params.tau0) for profile in ordered]
        fit = stats.linregress(np.log(1.0 / np.asarray(h_values)), np.asarray(phi0_max))
        predicted = ordered[0].params.M
        fitted = float(fit.slope)
        relative_error = abs(fitted - predicted) / predicted if predicted > 0.0 else abs(fitted)
        report = PhiGrowthReport(
            h_values=h_values,
            phi0_max=phi0_max,
            fitted_coefficient=fitted,
            predicted_coefficient=predicted,
            relative_error=relative_error,
            r_squared=float(fit.rvalue ** 2),
            passes=relative_error <= tol,
        )
        if not report.passes:
            logger.warning(
                f"max|phi0| grows like {fitted:.4f} log(1/h), expected {predicted:.4f} (relative error {relative_error:.3f})"
            )
        return report

    # constant search

    def build_profile(
        self, params: ConstructionParams, envelope: EnvelopeFn, R_E: float = 0.0, n: int = 2000,
        cross_check: bool = True, grid: Optional[Array] = None,
    ) -> PhaseWeightProfile:
        if params.case == "holder_1d":
            draft = self.build_Phi_W_1d(params, envelope, grid=grid, n=n, R_E=R_E)
        else:
            draft = self.build_Phi_W_radial(params, envelope, grid=grid, n=n, R_E=R_E)
        return self.integrate_profiles(draft, cross_check=cross_check)

    def search_constants(
        self,
        case: CaseKind,
        model: PotentialModel,
        envelope: EnvelopeFn,
        certificate: ClassCertificate,
        h_grid: Sequence[float],
        eta: float,
        K: float = DEFAULT_K,
        n_profile: int = 2000,
        n_mollify: int = 600,
        tau0_ladder: Sequence[float] = TAU0_LADDER,
        a0_ladder: Sequence[float] = A0_LADDER,
        delta_ladder: Sequence[float] = DELTA_LADDER,
    ) -> ConstructionParams:
        """Smallest tau0 (then a0; then largest delta in 1D) with a nonnegative margin on every h."""
        E, E_infty = certificate.E, certificate.E_infty
        alpha = certificate.alpha if case == "holder_radial" else 0.0
        R_E = certificate.R_EV
        h_values = sorted(h_grid, reverse=True)
        base: Dict[Tuple[float, float], SmoothedPotential] = {}
        worst = (np.inf, 0.0)

        def smoothed_for(params: ConstructionParams, grid: Array) -> SmoothedPotential:
            key = (params.h, params.a0)
            if key not in base:
                if case == "holder_1d":
                    base_grid = line_grid(float(np.max(np.abs(grid))), n_mollify)
                else:
                    base_grid, _ = radial_grid(params.a, n_mollify)
                base[key] = self.mollifier_service.build_smoothed(
                    model, case, params.h, params.mollifier_rho, base_grid, certificate
                )
            return base[key].resample(grid)

        def margin_at(params: ConstructionParams) -> Tuple[float, float]:
            profile = self.build_profile(params, envelope, R_E=R_E, n=n_profile, cross_check=False)
            smoothed = smoothed_for(params, profile.grid)
            report = self.certificate_service.key_margin(profile, smoothed, E, E_infty, K)
            return report.min_margin, report.argmin

        def passes_everywhere(params: ConstructionParams) -> bool:
            nonlocal worst
            for h in h_values:
                margin, where = margin_at(params.at(h))
                if margin < worst[0]:
                    worst = (margin, where)
                if margin < 0.0:
                    logger.debug(f"tau0={params.tau0}, a0={params.a0}, delta={params.delta}: margin {margin:.3e} at h={h}")
                    return False
            return True

        found: Optional[ConstructionParams] = None
        for tau0 in tau0_ladder:
            for a0 in (a0_ladder if case != "holder_1d" else [1.0]):
                for delta in (delta_ladder if case == "holder_1d" else [None]):
                    candidate = ConstructionParams(
                        case=case, alpha=alpha, eta=eta, tau0=tau0, a0=a0, K=K, h=h_values[0],
                        E=E, E_infty=E_infty, delta=delta,
                    )
                    if passes_everywhere(candidate):
                        found = candidate
                        break
                if found is not None:
                    break
            if found is not None:
                break

        if found is None:
            logger.error(f"Constant search exhausted for {model.family}; worst margin {worst[0]:.3e} at {worst[1]:.6g}")
            raise ConstructionSearchError(
                f"No (tau0, a0, delta) on the ladders gives a nonnegative margin; "
                f"worst margin {worst[0]:.3e} at {worst[1]:.6g}",
                worst_margin=float(worst[0]),
                worst_location=float(worst[1]),
            )

        # the search only accepts candidates certified on every grid h
        h0 = h_values[0]

        result = found.model_copy(update={"h": h0, "h0": h0, "tau0_reference": tau0_reference(certificate)})
        logger.info(
            f"Constants for {model.family} ({case}): tau0={result.tau0}, a0={result.a0}, "
            f"delta={result.delta}, h0={h0}"
        )
        return result
