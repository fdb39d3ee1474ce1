import logging
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import integrate

from carleman_lab.config import QUAD_MAX_PANELS, QUAD_ORDER, QUAD_REL_TOL
from carleman_lab.models.envelopes import envelope_values, japanese_bracket
from carleman_lab.models.grids import SmoothedPotential
from carleman_lab.models.kernels import MollifierKernel
from carleman_lab.models.potentials import breakpoints, evaluate
from carleman_lab.schemas.construction import CaseKind
from carleman_lab.schemas.potential import ClassCertificate, EnvelopeFn, PotentialModel
from carleman_lab.schemas.reports import MollifierBoundReport
from carleman_lab.services.potential_classes import HypothesisViolationError

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

SUP_TOL = 1e-8
BOUND_TOL = 1e-9


class MollificationError(Exception):
    """Raised when the mollification quadrature does not converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class MollifierService:
    """Smoothing V at scale gamma with a kernel supported in (0, 1)."""

    def __init__(
        self,
        kernel: Optional[MollifierKernel] = None,
        rel_tol: float = QUAD_REL_TOL,
        max_panels: int = QUAD_MAX_PANELS,
        order: int = QUAD_ORDER,
    ):
        self.kernel = kernel or MollifierKernel()
        self.rel_tol = rel_tol
        self.max_panels = max_panels
        self.order = order

    # pointwise quadrature

    def _split_points(self, model: PotentialModel, r: float, gamma: float) -> list:
        return [(b - r) / gamma for b in breakpoints(model, r, r + gamma)]

    def _quad(self, integrand, points: list) -> Tuple[float, float]:
        result = integrate.quad(
            integrand, 0.0, 1.0, points=points or None, epsabs=0.0, epsrel=self.rel_tol,
            limit=200, full_output=1,
        )
        value, error = result[0], result[1]
        if len(result) > 3:
            raise MollificationError(f"Mollification quadrature did not converge: {result[3]}", residual=error)
        return value, error

    def mollify(self, model: PotentialModel, r: float, gamma: float) -> Tuple[float, float]:
        """V(r; gamma) = integral of V(r + gamma s) chi(s) over (0, 1), with the quadrature error."""
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        chi = self.kernel.chi
        return self._quad(
            lambda s: float(evaluate(model, r + gamma * s) * chi(s)), self._split_points(model, r, gamma)
        )

    def mollify_derivative(self, model: PotentialModel, r: float, gamma: float) -> Tuple[float, float]:
        """d/dr V(r; gamma) = -gamma^-1 * integral of [V(r + gamma s) - V(r)] chi'(s) ds."""
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        V_r = float(evaluate(model, r))
        chi_prime = self.kernel.chi_prime
        value, error = self._quad(
            lambda s: float((evaluate(model, r + gamma * s) - V_r) * chi_prime(s)),
            self._split_points(model, r, gamma),
        )
        return -value / gamma, error / gamma

    # grid evaluation

    def _panel_rule(self, panels: int) -> Tuple[Array, Array]:
        nodes, weights = np.polynomial.legendre.leggauss(self.order)
        edges = np.linspace(0.0, 1.0, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        s = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        ws = (half[:, None] * weights[None, :]).ravel()
        return s, ws

    def _gauss_legendre(self, model: PotentialModel, grid: Array, gamma: float) -> Tuple[Array, Array]:
        V_grid = evaluate(model, grid)
        previous = None
        change = np.inf
        panels = 4
        while True:
            s, ws = self._panel_rule(panels)
            samples = evaluate(model, grid[:, None] + gamma * s[None, :])
            Vh = samples @ (ws * self.kernel.chi(s))
            Vh_prime = -((samples - V_grid[:, None]) @ (ws * self.kernel.chi_prime(s))) / gamma
            if previous is not None:
                scale = max(np.max(np.abs(Vh)), np.max(np.abs(Vh_prime)), 1e-300)
                change = max(np.max(np.abs(Vh - previous[0])), np.max(np.abs(Vh_prime - previous[1])))
                if change <= self.rel_tol * scale:
                    return Vh, Vh_prime
            if panels >= self.max_panels:
                raise MollificationError(
                    f"Gauss-Legendre refinement stalled at {panels} panels", residual=float(change)
                )
            previous = (Vh, Vh_prime)
            panels *= 2

    def _pointwise(self, model: PotentialModel, grid: Array, gamma: float) -> Tuple[Array, Array]:
        Vh = np.array([self.mollify(model, float(r), gamma)[0] for r in grid])
        Vh_prime = np.array([self.mollify_derivative(model, float(r), gamma)[0] for r in grid])
        return Vh, Vh_prime

    def build_smoothed(
        self,
        model: PotentialModel,
        case: CaseKind,
        h: float,
        rho: float,
        grid: Array,
        certificate: Optional[ClassCertificate] = None,
    ) -> SmoothedPotential:
        """V_h and V_h' on the grid; the pure decay case uses V_h = 0 and R_h = V."""
        grid = np.asarray(grid, dtype=float)
        V = evaluate(model, grid)
        if case == "linfty":
            zeros = np.zeros_like(grid)
            return SmoothedPotential(model, case, h, h ** rho, grid, V, zeros, zeros.copy(), self.kernel)

        gamma = h if case == "holder_1d" else h ** rho
        if certificate is not None:
            if case == "holder_1d" and h > certificate.delta_V:
                raise HypothesisViolationError(f"h={h} exceeds delta_0={certificate.delta_V:.6g}")
            if case == "holder_radial" and h > certificate.delta_V ** (1.0 / rho):
                raise HypothesisViolationError(
                    f"h={h} exceeds delta_V^(1/rho)={certificate.delta_V ** (1.0 / rho):.6g}"
                )
        if not 0.0 < gamma <= 1.0:
            raise HypothesisViolationError(f"mollification scale gamma={gamma} must lie in (0, 1]")

        lo, hi = float(grid.min()), float(grid.max()) + gamma
        if breakpoints(model, lo, hi) or model.family == "user_table":
            Vh, Vh_prime = self._pointwise(model, grid, gamma)
        else:
            Vh, Vh_prime = self._gauss_legendre(model, grid, gamma)
        logger.info(f"Smoothed {model.family} with gamma={gamma:.6g} on {grid.size} points")
        return SmoothedPotential(model, case, h, gamma, grid, V, Vh, Vh_prime, self.kernel)

    # bounds

    def _windowed_sup(self, model: PotentialModel, grid: Array, gamma: float, samples: int = 33) -> Array:
        """Sampled sup of V over [r, r + gamma], refined at breakpoints and their one-sided limits."""
        offsets = np.linspace(0.0, gamma, samples)
        sup = evaluate(model, grid[:, None] + offsets[None, :]).max(axis=1)
        lo, hi = float(grid.min()), float(grid.max()) + gamma
        points = np.asarray(breakpoints(model, lo, hi), dtype=float)
        if points.size == 0:
            return sup
        order = np.argsort(grid, kind="stable")
        ordered = grid[order]
        for edge in (points, points - 1e-12, points + 1e-12):
            V_edge = evaluate(model, edge)
            first = np.searchsorted(ordered, edge - gamma, side="left")
            last = np.searchsorted(ordered, edge, side="right")
            for start, stop, value in zip(first, last, V_edge):
                if stop > start:
                    idx = order[start:stop]
                    sup[idx] = np.maximum(sup[idx], value)
        return sup

    def verify_mollifier_bounds(
        self, sp: SmoothedPotential, certificate: ClassCertificate, envelope: EnvelopeFn,
    ) -> MollifierBoundReport:
        """Pointwise check of the mollification bounds of the applicable case; failures are reported."""
        grid = sp.grid
        r = np.abs(grid)
        m = envelope_values(envelope, r)
        c = max(certificate.c_const, 1e-300)
        alpha = certificate.alpha
        C_chi = self.kernel.constant(alpha)

        sup_ok = bool(np.all(sp.Vh <= self._windowed_sup(sp.model, grid, sp.gamma) + SUP_TOL))

        if sp.case == "linfty":
            weight = m / (1.0 + r * r)
            ratio_R = np.abs(sp.R_h) / (c * weight)
            ratio_Vp = np.zeros_like(grid)
            weighted_R = np.abs(sp.R_h) / weight
        elif sp.case == "holder_radial":
            weight = m ** 2 / japanese_bracket(r) ** 3
            ratio_R = np.abs(sp.R_h) / (c * sp.gamma ** alpha * weight)
            ratio_Vp = np.abs(sp.Vh_prime) / (C_chi * c * sp.gamma ** (alpha - 1.0) * weight)
            weighted_R = np.abs(sp.R_h) / weight
        else:
            ratio_R = np.abs(sp.R_h) / (c * sp.h * m)
            ratio_Vp = np.abs(sp.Vh_prime) / (C_chi * c * m / sp.h)
            weighted_R = np.abs(sp.R_h) / m

        max_ratio_R = float(ratio_R.max())
        max_ratio_Vp = float(ratio_Vp.max())
        passes = sup_ok and max_ratio_R <= 1.0 + BOUND_TOL and max_ratio_Vp <= 1.0 + BOUND_TOL
        if not passes:
            logger.warning(
                f"Mollifier bounds fail for {sp.model.family} at h={sp.h}: sup_ok={sup_ok}, "
                f"R ratio={max_ratio_R:.4g}, V_h' ratio={max_ratio_Vp:.4g}"
            )
        return MollifierBoundReport(
            case=sp.case,
            gamma=sp.gamma,
            sup_envelope_ok=sup_ok,
            max_ratio_R=max_ratio_R,
            max_ratio_Vh_prime=max_ratio_Vp,
            max_weighted_R=float(weighted_R.max()),
            max_abs_Vh_prime=float(np.abs(sp.Vh_prime).max()),
            C_chi=C_chi,
            passes=passes,
        )
