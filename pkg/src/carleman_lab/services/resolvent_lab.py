import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, stats

from carleman_lab.config import (
    BOX_DOUBLING_TOL,
    BOX_MAX_DOUBLINGS,
    DEFAULT_THREADS,
    POWER_ITER_MAX,
    POWER_ITER_TOL,
)
from carleman_lab.models.grids import DiscretizedOperator
from carleman_lab.models.potentials import evaluate
from carleman_lab.results_sink import ResultsSink
from carleman_lab.schemas.potential import PotentialModel
from carleman_lab.schemas.reports import EpsRule, ExponentFit, LinearFit, ResolventRun

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]

MIN_POINTS = 200
MIN_FIT_POINTS = 5
DENSE_LIMIT = 1200
POINTS_PER_WAVELENGTH = 40.0


class ResolventError(Exception):
    """Raised for invalid discretization parameters or a stalled power iteration."""
    pass


class FitError(Exception):
    """Raised when an exponent fit has too few usable runs."""
    pass


def default_box(E: float, h: float, eps: float) -> float:
    """Box half-width covering about ten resolvent decay lengths 2 sqrt(E) h / eps."""
    return max(20.0, 20.0 * math.sqrt(max(E, 0.0)) * h / eps)


def centrifugal_coefficient(l: int, n: int) -> float:
    """lambda_l + (n-1)(n-3)/4 with lambda_l = l(l + n - 2)."""
    return l * (l + n - 2) + (n - 1) * (n - 3) / 4.0


def _linear_fit(x: Array, y: Array) -> LinearFit:
    result = stats.linregress(x, y)
    residuals = y - (result.intercept + result.slope * x)
    return LinearFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue ** 2),
        residuals=[float(v) for v in residuals],
        rss=float(np.sum(residuals ** 2)),
    )


class ResolventLabService:
    """Direct computation of the weighted resolvent norm and its growth in 1/h."""

    def __init__(
        self,
        tol: float = POWER_ITER_TOL,
        max_iter: int = POWER_ITER_MAX,
        box_tol: float = BOX_DOUBLING_TOL,
        max_doublings: int = BOX_MAX_DOUBLINGS,
        seed: int = 0,
    ):
        self.tol = tol
        self.max_iter = max_iter
        self.box_tol = box_tol
        self.max_doublings = max_doublings
        self.seed = seed

    def discretize(
        self,
        model: PotentialModel,
        h: float,
        E: float,
        eps: float,
        sign: int = 1,
        s: float = 1.0,
        L: Optional[float] = None,
        N: Optional[int] = None,
        l: int = 0,
        n: int = 1,
    ) -> DiscretizedOperator:
        """Three-point discretization of P(h) - E +/- i eps with Dirichlet ends.

        One dimension uses the box [-L, L] with spacing 2L/(N+1); n >= 3 uses (0, L] with
        spacing L/(N+1), so the first radial node is close to L/N.
        """
        if not 0.0 < h <= 1.0:
            raise ResolventError(f"h must lie in (0, 1], got {h}")
        if eps < 0.0:
            raise ResolventError(f"eps must be nonnegative, got {eps}")
        if sign not in (1, -1):
            raise ResolventError(f"sign must be +1 or -1, got {sign}")
        if not s > 0.5:
            raise ResolventError(f"s must exceed 1/2, got {s}")
        if n == 2 or n < 1:
            raise ResolventError(f"dimension n must be 1 or at least 3, got {n}")
        if l < 0:
            raise ResolventError(f"mode l must be nonnegative, got {l}")
        if L is None:
            L = default_box(E, h, eps) if eps > 0.0 else 20.0
        if L <= 0.0:
            raise ResolventError(f"box size L must be positive, got {L}")
        width = 2.0 * L if n == 1 else L
        wanted = int(math.ceil(POINTS_PER_WAVELENGTH * L / h))
        N = max(MIN_POINTS, wanted) if N is None else N
        if N < MIN_POINTS:
            raise ResolventError(f"N must be at least {MIN_POINTS}, got {N}")
        if N < wanted:
            logger.warning(f"N={N} is below the resolution guard {wanted} for h={h}, L={L}")

        spacing = width / (N + 1)
        offsets = spacing * np.arange(1, N + 1)
        grid = offsets - L if n == 1 else offsets
        V = evaluate(model, grid)
        if n >= 3:
            V = V + h ** 2 * centrifugal_coefficient(l, n) / grid ** 2
        diagonal = 2.0 * h ** 2 / spacing ** 2 + V - E + 1j * sign * eps
        return DiscretizedOperator(
            dimension_mode="line" if n == 1 else "radial",
            grid=grid,
            spacing=spacing,
            diagonal=diagonal.astype(complex),
            off_diagonal=-(h ** 2) / spacing ** 2,
            weights=(1.0 + grid ** 2) ** (-0.5 * s),
            h=h,
            E=E,
            eps=eps,
            sign=sign,
            s=s,
            L=L,
            l=l,
            n=n,
            model=model,
        )

    def _power_iteration(self, op: DiscretizedOperator) -> Tuple[float, int]:
        """Largest singular value of D (P - z)^-1 D by power iteration on its normal form."""
        ab = op.banded()
        ab_adjoint = op.banded(conjugate=True)
        D = op.weights
        rng = np.random.default_rng(self.seed)
        x = rng.standard_normal(op.N).astype(complex)
        x /= np.linalg.norm(x)
        value = 0.0
        for iteration in range(1, self.max_iter + 1):
            y = D * linalg.solve_banded((1, 1), ab, D * x, check_finite=False)
            z = D * linalg.solve_banded((1, 1), ab_adjoint, D * y, check_finite=False)
            norm_z = np.linalg.norm(z)
            if norm_z == 0.0:
                raise ResolventError("power iteration collapsed to the zero vector")
            new_value = math.sqrt(float(np.real(np.vdot(x, z))))
            x = z / norm_z
            if abs(new_value - value) <= self.tol * new_value:
                return new_value, iteration
            value = new_value
        logger.error(f"Power iteration did not converge in {self.max_iter} iterations (h={op.h}, N={op.N})")
        raise ResolventError(f"power iteration did not converge after {self.max_iter} iterations")

    def dense_weighted_resolvent_norm(self, op: DiscretizedOperator) -> float:
        """Full singular-value decomposition of D (P - z)^-1 D; small systems only."""
        if op.N > DENSE_LIMIT:
            raise ResolventError(f"dense oracle is limited to N <= {DENSE_LIMIT}, got {op.N}")
        resolvent = linalg.inv(op.to_dense())
        weighted = op.weights[:, None] * resolvent * op.weights[None, :]
        return float(linalg.svdvals(weighted)[0])

    def _doubled(self, op: DiscretizedOperator) -> DiscretizedOperator:
        # same spacing on a box twice as wide
        return self.discretize(
            op.model, op.h, op.E, op.eps, op.sign, op.s, L=2.0 * op.L, N=2 * op.N + 1, l=op.l, n=op.n,
        )

    def weighted_resolvent_norm(self, op: DiscretizedOperator, check_box: bool = True) -> ResolventRun:
        """g for the operator; the box is doubled until g changes by less than the box tolerance."""
        if not op.eps > 0.0:
            raise ResolventError("the weighted resolvent norm needs eps > 0")
        value, iterations = self._power_iteration(op)
        converged = False
        current = op
        if check_box and op.model is not None:
            for _ in range(self.max_doublings):
                larger = self._doubled(current)
                larger_value, iterations = self._power_iteration(larger)
                change = abs(larger_value - value) / larger_value
                current, value = larger, larger_value
                if change < self.box_tol:
                    converged = True
                    break
            if not converged:
                logger.warning(f"Box doubling did not settle for h={op.h}, eps={op.eps}; last L={current.L}")

        resolution_ok = current.N >= POINTS_PER_WAVELENGTH * current.L / current.h
        return ResolventRun(
            h=current.h,
            eps=current.eps,
            E=current.E,
            s=current.s,
            L=current.L,
            N=current.N,
            g_value=value,
            converged=converged,
            sign=current.sign,
            l=current.l,
            n=current.n,
            iterations=iterations,
            resolution_ok=bool(resolution_ok),
        )

    def resolvent_run(
        self,
        model: PotentialModel,
        h: float,
        E: float,
        eps: float,
        sign: int = 1,
        s: float = 1.0,
        L: Optional[float] = None,
        N: Optional[int] = None,
        l: int = 0,
        n: int = 1,
    ) -> ResolventRun:
        return self.weighted_resolvent_norm(self.discretize(model, h, E, eps, sign, s, L, N, l, n))

    def h_sweep(
        self,
        model: PotentialModel,
        E: float,
        s: float,
        eps_rule: EpsRule,
        h_grid: Sequence[float],
        n: int = 1,
        modes: Sequence[int] = (0,),
        signs: Sequence[int] = (1,),
        L: Optional[float] = None,
        N: Optional[int] = None,
        threads: int = DEFAULT_THREADS,
        sink: Optional[ResultsSink] = None,
    ) -> List[ResolventRun]:
        """One run per (h, mode, sign); results are ordered by decreasing h, then mode, then sign."""
        if len(h_grid) < MIN_FIT_POINTS:
            logger.warning(f"h-sweep with {len(h_grid)} points cannot be fitted (fewer than {MIN_FIT_POINTS} points)")
        jobs = [
            (h, l, sign)
            for h in sorted(h_grid, reverse=True)
            for l in (modes if n >= 3 else (0,))
            for sign in signs
        ]

        def run(job: Tuple[float, int, int]) -> ResolventRun:
            h, l, sign = job
            result = self.resolvent_run(model, h, E, eps_rule(h), sign, s, L, N, l, n)
            if sink is not None:
                sink.append("resolvent-sweep", {"family": model.family, **result.model_dump()})
            return result

        with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
            runs = list(executor.map(run, jobs))
        excluded = sum(1 for r in runs if not r.converged)
        if excluded:
            logger.warning(f"{excluded} of {len(runs)} runs did not pass the box-doubling test")
        logger.info(f"Resolvent sweep for {model.family}: {len(runs)} runs over {len(h_grid)} values of h")
        return runs

    def fit_exponent(self, runs: Sequence[ResolventRun], sigma_alpha: float) -> ExponentFit:
        """Least-squares fits of log g: against 1/h, log log g against log(1/h), and the theorem shape."""
        usable = [r for r in runs if r.converged]
        best: Dict[float, float] = {}
        for r in usable:
            best[r.h] = max(best.get(r.h, 0.0), r.g_value)
        if len(best) < MIN_FIT_POINTS:
            raise FitError(f"fewer than {MIN_FIT_POINTS} points: {len(best)} converged values of h")
        h = np.array(sorted(best), dtype=float)
        log_g = np.log(np.array([best[v] for v in h]))
        inverse_h = _linear_fit(1.0 / h, log_g)
        shape_x = h ** (-1.0 - sigma_alpha) * (sigma_alpha * np.log(1.0 / h) + 1.0)
        theorem_shape = _linear_fit(shape_x, log_g)
        loglog = _linear_fit(np.log(1.0 / h), np.log(log_g)) if np.all(log_g > 0.0) else None
        preferred = "theorem_shape" if theorem_shape.rss < inverse_h.rss else "inverse_h"
        return ExponentFit(
            h_range=[float(h.min()), float(h.max())],
            n_points=int(h.size),
            sigma_alpha=sigma_alpha,
            inverse_h=inverse_h,
            loglog=loglog,
            theorem_shape=theorem_shape,
            preferred_model=preferred,
            excluded_runs=len(runs) - len(usable),
        )

    def smallest_trustworthy_eps(
        self,
        model: PotentialModel,
        h: float,
        E: float,
        s: float,
        eps_ladder: Sequence[float],
        L: Optional[float] = None,
        N: Optional[int] = None,
        n: int = 1,
        l: int = 0,
    ) -> Optional[float]:
        """Walk down the ladder; the last eps whose box-doubling test passed, or None."""
        trusted = None
        for eps in sorted(eps_ladder, reverse=True):
            try:
                run = self.resolvent_run(model, h, E, eps, 1, s, L, N, l, n)
            except ResolventError as e:
                logger.warning(f"Stopping eps ladder at eps={eps}: {e}")
                break
            if not run.converged:
                break
            trusted = eps
        return trusted
