import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate

from carleman_lab.config import ENVELOPE_TAIL_TOL, LINFTY_GROWTH_TOL
from carleman_lab.models.envelopes import envelope_values, japanese_bracket
from carleman_lab.models.potentials import breakpoints, evaluate
from carleman_lab.schemas.construction import CaseKind
from carleman_lab.schemas.potential import (
    ClassCertificate,
    DeltaScan,
    EnvelopeFn,
    Holder1DResult,
    IntegrabilityReport,
    LinftyDecayResult,
    PotentialModel,
    SupBoundReport,
)

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

TINY_ENVELOPE = 1e-300
BOUNDARY_RTOL = 1e-9


class PotentialDomainError(Exception):
    """Raised when a potential is evaluated outside its domain or returns a non-finite value."""
    pass


class DegenerateEnvelopeError(Exception):
    """Raised when an envelope evaluates to zero numerically."""
    pass


class HypothesisViolationError(Exception):
    """Raised when a potential or parameter choice violates a required hypothesis."""
    pass


class ArgumentError(Exception):
    """Raised for invalid scan arguments such as an empty y-grid."""
    pass


def check_grid(model: PotentialModel, r_max: float, n: int) -> Array:
    """Geometric grid on [1e-4, r_max] merged with a uniform one on (0, min(r_max, 50)]."""
    geometric = np.geomspace(1e-4, r_max, n // 2)
    uniform = np.linspace(0.0, min(r_max, 50.0), n - n // 2 + 1)[1:]
    radial = np.unique(np.concatenate([geometric, uniform]))
    if model.dimension_mode == "line":
        return np.concatenate([-radial[::-1], [0.0], radial])
    return radial


def y_scan_grid(y_min: float, y_max: float, n_y: int) -> Array:
    return np.geomspace(y_min, y_max, n_y)


class PotentialClassService:
    """Hypothesis checks and derived constants for a potential model."""

    def __init__(self, growth_tol: float = LINFTY_GROWTH_TOL, tail_tol: float = ENVELOPE_TAIL_TOL):
        self.growth_tol = growth_tol
        self.tail_tol = tail_tol

    # evaluation

    def potential_values(self, model: PotentialModel, points: ArrayLike) -> Array:
        points = np.asarray(points, dtype=float)
        if model.dimension_mode == "radial" and np.any(points <= 0.0):
            bad = float(points[points <= 0.0].flat[0])
            raise PotentialDomainError(f"Radial potential evaluated at r={bad}; radial points must be positive")
        values = evaluate(model, points)
        if not np.all(np.isfinite(values)):
            raise PotentialDomainError(f"Potential {model.family} returned non-finite values")
        return values

    def eval_potential(self, model: PotentialModel, point: float, direction_index: int = 0) -> float:
        """V at a single point; direction_index is reserved for angular models."""
        return float(self.potential_values(model, np.array([point]))[0])

    def envelope_checked(self, envelope: EnvelopeFn, r: ArrayLike) -> Array:
        m = envelope_values(envelope, r)
        if np.any(m <= TINY_ENVELOPE):
            raise DegenerateEnvelopeError(f"Envelope {envelope.family} evaluates to 0 numerically")
        if np.any(m > 1.0):
            raise DegenerateEnvelopeError(f"Envelope {envelope.family} exceeds 1")
        return m

    # envelope and decay hypotheses

    def check_envelope_integrability(
        self, envelope: EnvelopeFn, usage: str = "m", r_max: float = 1.0e4, doublings: int = 3,
    ) -> IntegrabilityReport:
        """Quadrature increments over [R, 2R]; they must shrink and end below the tail tolerance."""
        if usage == "m":
            integrand = lambda r: envelope_values(envelope, r) ** 2 / japanese_bracket(r)
        else:
            integrand = lambda r: envelope_values(envelope, r)
        windows = []
        increments = []
        R = r_max
        for _ in range(doublings):
            value, _ = integrate.quad(lambda r: float(integrand(r)), R, 2.0 * R, limit=200)
            windows.append((R, 2.0 * R))
            increments.append(value)
            R *= 2.0
        decreasing = all(b < a for a, b in zip(increments, increments[1:]))
        converged = decreasing and increments[-1] < self.tail_tol
        logger.info(f"Envelope {envelope.family} as {usage}: tail increments {increments}, converged={converged}")
        return IntegrabilityReport(usage=usage, windows=windows, increments=increments, converged=converged)

    def check_linfty_decay(
        self, model: PotentialModel, envelope: EnvelopeFn, grid: Array, windows: int = 3,
    ) -> LinftyDecayResult:
        grid = np.asarray(grid, dtype=float)
        r = np.abs(grid)
        m = self.envelope_checked(envelope, r)
        weighted = np.abs(self.potential_values(model, grid)) * (1.0 + r * r) / m
        r_max = float(r.max())
        trend = []
        for k in range(windows - 1, -1, -1):
            R = r_max * 10.0 ** (-k)
            trend.append((R, float(weighted[r <= R].max(initial=0.0))))
        c1 = trend[-1][1]
        growing = any(
            later > earlier * (1.0 + self.growth_tol) for (_, earlier), (_, later) in zip(trend, trend[1:])
        )
        passes = bool(np.isfinite(c1) and not growing)
        logger.info(f"Linfty decay check for {model.family}: c1={c1:.6g}, passes={passes}")
        return LinftyDecayResult(passes=passes, c1=c1, trend=trend)

    # Holder moduli

    def _shifted_grid(self, model: PotentialModel, grid: Array, y: float) -> Array:
        """Grid augmented with b, b - y and b - y/2 at every breakpoint b."""
        lo, hi = float(grid.min()), float(grid.max())
        points = np.asarray(breakpoints(model, lo - y, hi), dtype=float)
        if points.size == 0:
            return grid
        extra = np.concatenate([points, points - y, points - 0.5 * y])
        extra = extra[(extra >= lo) & (extra <= hi)]
        if model.dimension_mode == "radial":
            extra = extra[extra > 0.0]
        return np.union1d(grid, extra)

    def holder_modulus(
        self, model: PotentialModel, alpha: float, y: float, envelope: EnvelopeFn, grid: Array,
    ) -> float:
        """sup_r |V(r) - V(r + y)| / y^alpha * <r>^3 m^-2(r) over the grid."""
        if y <= 0.0:
            raise ArgumentError(f"y must be positive, got {y}")
        if not 0.0 <= alpha <= 1.0:
            raise ArgumentError(f"alpha must lie in [0, 1], got {alpha}")
        points = self._shifted_grid(model, np.asarray(grid, dtype=float), y)
        r = np.abs(points)
        m = self.envelope_checked(envelope, r)
        diff = np.abs(self.potential_values(model, points) - self.potential_values(model, points + y))
        return float(np.max(diff / y ** alpha * japanese_bracket(r) ** 3 / m ** 2))

    def holder_modulus_1d(self, model: PotentialModel, y: float, m0: EnvelopeFn, grid: Array) -> float:
        """sup_x |V(x) - V(x + y)| / m0(|x|)."""
        if y <= 0.0:
            raise ArgumentError(f"y must be positive, got {y}")
        points = self._shifted_grid(model, np.asarray(grid, dtype=float), y)
        m0_values = self.envelope_checked(m0, np.abs(points))
        diff = np.abs(self.potential_values(model, points) - self.potential_values(model, points + y))
        return float(np.max(diff / m0_values))

    def _moduli(self, modulus, y_grid: Sequence[float]) -> Tuple[Array, Array]:
        y_values = np.sort(np.asarray(y_grid, dtype=float))
        if y_values.size == 0:
            raise ArgumentError("y_grid must not be empty")
        return y_values, np.array([modulus(float(y)) for y in y_values])

    @staticmethod
    def _smallest_decade(y_values: Array, moduli: Array) -> float:
        return float(moduli[y_values <= 10.0 * y_values[0]].max())

    def estimate_holder_constant(
        self, model: PotentialModel, alpha: float, envelope: EnvelopeFn, grid: Array, y_grid: Sequence[float],
    ) -> float:
        """limsup estimate of c2: largest modulus over the smallest decade of the y-grid."""
        y_values, moduli = self._moduli(lambda y: self.holder_modulus(model, alpha, y, envelope, grid), y_grid)
        return self._smallest_decade(y_values, moduli)

    @staticmethod
    def _scan(y_values: Array, moduli: Array, threshold: float) -> DeltaScan:
        near = np.abs(moduli - threshold) <= BOUNDARY_RTOL * max(threshold, 1e-300)
        exceeded = np.nonzero(moduli > threshold)[0]
        if exceeded.size == 0:
            y_max = float(y_values[-1])
            return DeltaScan(delta=y_max, delta_lower=y_max, exceeded=False, at_grid_boundary=bool(near.any()))
        index = int(exceeded[0])
        lower = float(y_values[index - 1]) if index > 0 else 0.0
        return DeltaScan(
            delta=float(y_values[index]),
            delta_lower=lower,
            exceeded=True,
            at_grid_boundary=bool(near[: index + 1].any()),
        )

    def compute_delta_V(
        self, model: PotentialModel, alpha: float, c2: float, envelope: EnvelopeFn,
        grid: Array, y_grid: Sequence[float],
    ) -> DeltaScan:
        """First y whose modulus exceeds 2 c2; the y-grid maximum when none does."""
        y_values, moduli = self._moduli(lambda y: self.holder_modulus(model, alpha, y, envelope, grid), y_grid)
        scan = self._scan(y_values, moduli, 2.0 * c2)
        if scan.at_grid_boundary:
            logger.warning(f"delta_V scan for {model.family} hit the 2*c2 threshold within grid tolerance")
        return scan

    def check_holder_1d(
        self, model: PotentialModel, m0: EnvelopeFn, grid: Array, y_grid: Sequence[float],
        c0_floor: Optional[float] = None,
    ) -> Holder1DResult:
        y_values, moduli = self._moduli(lambda y: self.holder_modulus_1d(model, y, m0, grid), y_grid)
        c0 = self._smallest_decade(y_values, moduli)
        c0_used = max(c0, c0_floor or 0.0)
        scan = self._scan(y_values, moduli, 2.0 * c0_used)
        delta0 = scan.delta_lower if scan.delta_lower > 0.0 else scan.delta
        logger.info(f"1D modulus for {model.family}: c0={c0:.6g}, c0_used={c0_used:.6g}, delta0={delta0:.6g}")
        return Holder1DResult(c0=c0, delta0=delta0, c0_used=c0_used, at_grid_boundary=scan.at_grid_boundary)

    # energies and radii

    def compute_V_infty(self, model: PotentialModel, grid: Array) -> Tuple[float, Tuple[float, float]]:
        """Running sup of V over the tail window [r_max/2, r_max] (both sides in one dimension)."""
        grid = np.asarray(grid, dtype=float)
        r = np.abs(grid)
        r_max = float(r.max())
        window = (0.5 * r_max, r_max)
        tail = grid[r >= window[0]]
        return float(self.potential_values(model, tail).max()), window

    def compute_R_EV(self, model: PotentialModel, E: float, V_infty: float, grid: Array) -> float:
        """First radius beyond the last point where V exceeds (E + 3 V_infty)/4; 0 if none."""
        if not E > V_infty:
            raise ArgumentError(f"E={E} must exceed V_infty={V_infty}")
        grid = np.asarray(grid, dtype=float)
        order = np.argsort(np.abs(grid), kind="stable")
        radii = np.abs(grid)[order]
        values = self.potential_values(model, grid)[order]
        above = np.nonzero(values > 0.25 * (E + 3.0 * V_infty))[0]
        if above.size == 0:
            return 0.0
        last = int(above[-1])
        beyond = radii > radii[last]
        return float(radii[beyond][0]) if beyond.any() else float(radii[last])

    def check_sup_bound(self, model: PotentialModel, grid: Array) -> SupBoundReport:
        C_V = float(np.abs(self.potential_values(model, grid)).max())
        declared = model.bound_C_V
        within = bool(np.isfinite(C_V)) and (declared is None or C_V <= declared)
        if not within:
            logger.warning(f"sup |V| = {C_V:.6g} exceeds declared bound {declared}")
        return SupBoundReport(C_V=C_V, declared=declared, within_declared=within)

    # certificate

    def classify(
        self,
        model: PotentialModel,
        case: CaseKind,
        envelope: EnvelopeFn,
        E: float,
        E_infty: float,
        alpha: float = 0.0,
        r_max: float = 1.0e4,
        n_check: int = 4000,
        y_grid: Optional[Sequence[float]] = None,
        c0_floor: Optional[float] = None,
    ) -> ClassCertificate:
        """Run the hypothesis checks of the selected case and assemble a certificate."""
        if not E > E_infty:
            raise HypothesisViolationError(f"E={E} must exceed E_infty={E_infty}")
        expected_mode = "line" if case == "holder_1d" else "radial"
        if model.dimension_mode != expected_mode:
            raise HypothesisViolationError(f"Case {case} requires a {expected_mode} potential")

        grid = check_grid(model, r_max, n_check)
        y_values = np.asarray(y_grid if y_grid is not None else y_scan_grid(1e-6, 1.0, 40), dtype=float)
        sup = self.check_sup_bound(model, grid)
        V_infty, window = self.compute_V_infty(model, grid)
        if V_infty > E_infty:
            raise HypothesisViolationError(f"V_infty={V_infty:.6g} exceeds E_infty={E_infty}")

        usage = "m0" if case == "holder_1d" else "m"
        integrability = self.check_envelope_integrability(envelope, usage=usage)
        if not integrability.converged:
            raise HypothesisViolationError(
                f"Envelope {envelope.family} fails the {usage} integrability tail test: {integrability.increments}"
            )

        at_boundary = False
        if case == "linfty":
            decay = self.check_linfty_decay(model, envelope, grid)
            if not decay.passes:
                raise HypothesisViolationError(f"|V| <= c1 <r>^-2 m(r) fails: c1 trend {decay.trend}")
            alpha, c_const, delta = 0.0, decay.c1, 1.0
        elif case == "holder_radial":
            c_const = self.estimate_holder_constant(model, alpha, envelope, grid, y_values)
            scan = self.compute_delta_V(model, alpha, c_const, envelope, grid, y_values)
            delta = scan.delta_lower if scan.delta_lower > 0.0 else scan.delta
            at_boundary = scan.at_grid_boundary
        else:
            result = self.check_holder_1d(model, envelope, grid, y_values, c0_floor=c0_floor)
            alpha, c_const, delta = 0.0, result.c0_used, result.delta0
            at_boundary = result.at_grid_boundary

        R_EV = self.compute_R_EV(model, E, V_infty, grid)
        certificate = ClassCertificate(
            condition={"linfty": "Linfty_decay", "holder_radial": "holder_radial", "holder_1d": "holder_1d"}[case],
            alpha=alpha,
            c_const=c_const,
            V_infty=V_infty,
            delta_V=delta,
            R_EV=R_EV,
            E=E,
            E_infty=E_infty,
            C_V=sup.C_V,
            tail_window=window,
            delta_at_grid_boundary=at_boundary,
        )
        logger.info(
            f"Classified {model.family} as {certificate.condition}: c={c_const:.6g}, "
            f"V_infty={V_infty:.6g}, delta={delta:.6g}, R_EV={R_EV:.6g}"
        )
        return certificate
