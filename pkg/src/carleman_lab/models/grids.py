"""Array containers passed between the services.

The pydantic schemas hold parameters and summaries; grids of values live here as
frozen dataclasses of numpy arrays.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Literal, Optional

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from carleman_lab.models.kernels import MollifierKernel
from carleman_lab.models.potentials import evaluate
from carleman_lab.schemas.construction import CaseKind, ConstructionParams
from carleman_lab.schemas.potential import PotentialModel
from carleman_lab.schemas.reports import CarlemanSummary

Array = NDArray[np.float64]


@dataclass(frozen=True)
class SmoothedPotential:
    model: PotentialModel
    case: CaseKind
    h: float
    gamma: float
    grid: Array
    V: Array
    Vh: Array
    Vh_prime: Array
    kernel: MollifierKernel = field(default_factory=MollifierKernel)

    @property
    def R_h(self) -> Array:
        return self.V - self.Vh

    def resample(self, grid: Array) -> "SmoothedPotential":
        """Interpolate V_h and V_h' onto another grid; V is re-evaluated exactly there."""
        grid = np.asarray(grid, dtype=float)
        if self.case == "linfty":
            Vh = np.zeros_like(grid)
            Vh_prime = np.zeros_like(grid)
        else:
            Vh = np.interp(grid, self.grid, self.Vh)
            Vh_prime = np.interp(grid, self.grid, self.Vh_prime)
        return SmoothedPotential(
            model=self.model, case=self.case, h=self.h, gamma=self.gamma, grid=grid,
            V=evaluate(self.model, grid), Vh=Vh, Vh_prime=Vh_prime, kernel=self.kernel,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "r": self.grid, "V": self.V, "V_h": self.Vh, "V_h_prime": self.Vh_prime, "R_h": self.R_h,
        })


@dataclass(frozen=True)
class PhaseWeightDraft:
    """Phi, W and Phi1 on the build grid, plus the formulas that produced them."""
    params: ConstructionParams
    grid: Array
    Phi: Array
    Wcal: Array
    Phi1: Array
    Phi_fn: Callable[[Array], Array]
    Wcal_fn: Callable[[Array], Array]
    Phi1_fn: Callable[[Array], Array]
    R_E: float = 0.0
    jump_index: Optional[int] = None
    m0_fn: Optional[Callable[[Array], Array]] = None


@dataclass(frozen=True)
class PhaseWeightProfile:
    """Integrated phase and weight.

    w and w' are stored as logarithms; ``w`` and ``w_prime`` are rescaled by
    exp(-log_shift) so that the largest stored w equals 1.
    """
    params: ConstructionParams
    grid: Array
    Phi: Array
    Wcal: Array
    Phi1: Array
    phi0_prime: Array
    phi0: Array
    log_w: Array
    log_w_prime: Array
    log_shift: float
    omega: Array
    psi: Array
    R_E: float = 0.0
    jump_index: Optional[int] = None
    xcheck_max_error: float = 0.0

    @property
    def h_scale(self) -> float:
        # phi = h^-sigma phi0 radially; one-dimensional phases are not rescaled
        return 1.0 if self.params.case == "holder_1d" else self.params.h ** (-self.params.sigma)

    @property
    def phi_prime(self) -> Array:
        return self.h_scale * self.phi0_prime

    @property
    def phi(self) -> Array:
        return self.h_scale * self.phi0

    @property
    def phi_second(self) -> Array:
        return self.Phi * self.phi_prime

    @property
    def phi0_second(self) -> Array:
        return self.Phi * self.phi0_prime

    @property
    def w(self) -> Array:
        return np.exp(self.log_w - self.log_shift)

    @property
    def w_prime(self) -> Array:
        return np.exp(self.log_w_prime - self.log_shift)

    @property
    def w_over_w_prime(self) -> Array:
        return np.exp(self.log_w - self.log_w_prime)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "r": self.grid,
            "Phi": self.Phi,
            "Wcal": self.Wcal,
            "Phi1": self.Phi1,
            "phi0_prime": self.phi0_prime,
            "phi0": self.phi0,
            "phi0_second": self.phi0_second,
            "phi_prime": self.phi_prime,
            "phi": self.phi,
            "log_w": self.log_w,
            "log_w_prime": self.log_w_prime,
            "w": self.w,
            "w_prime": self.w_prime,
        })


@dataclass(frozen=True)
class ConjugationCoefficients:
    grid: Array
    phi_prime: Array
    phi_second: Array
    h: float
    dimension_mode: Literal["line", "radial"] = "line"

    @classmethod
    def from_profile(cls, profile: PhaseWeightProfile) -> "ConjugationCoefficients":
        mode = "line" if profile.params.case == "holder_1d" else "radial"
        return cls(
            grid=profile.grid, phi_prime=profile.phi_prime, phi_second=profile.phi_second,
            h=profile.params.h, dimension_mode=mode,
        )

    @classmethod
    def flat(cls, grid: Array, h: float, dimension_mode: Literal["line", "radial"] = "line") -> "ConjugationCoefficients":
        zeros = np.zeros_like(grid, dtype=float)
        return cls(grid=grid, phi_prime=zeros, phi_second=zeros, h=h, dimension_mode=dimension_mode)


@dataclass(frozen=True)
class CarlemanReport:
    """Pointwise certification of A - (K/2)B against ((E - E_infty)/2) w'.

    All per-point quantities are divided by w' (which is positive everywhere), so
    ``margin_per_wprime`` has the sign of the margin itself.
    """
    params: ConstructionParams
    grid: Array
    A_per_wprime: Array
    B_per_wprime: Array
    bracket: Array
    target_per_wprime: float
    certified: Array
    min_margin: float
    argmin: float
    chain_algebra_holds: bool
    bracket_ge_target: bool
    psi: Array

    @property
    def margin_per_wprime(self) -> Array:
        return self.A_per_wprime - 0.5 * self.params.K * self.B_per_wprime - self.target_per_wprime

    @property
    def passes(self) -> bool:
        return bool(np.all(self.certified) and self.chain_algebra_holds and self.min_margin >= 0.0)

    @property
    def in_cutoff_support(self) -> bool:
        return bool(np.interp(self.argmin, self.grid, self.psi) > 0.0)

    def summary(self) -> CarlemanSummary:
        return CarlemanSummary(
            h=self.params.h,
            min_margin=float(self.min_margin),
            argmin=float(self.argmin),
            chain_algebra_holds=self.chain_algebra_holds,
            bracket_ge_target=self.bracket_ge_target,
            passes=self.passes,
            in_cutoff_support=self.in_cutoff_support,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "r": self.grid,
            "A_per_wprime": self.A_per_wprime,
            "B_per_wprime": self.B_per_wprime,
            "margin_per_wprime": self.margin_per_wprime,
            "keycalc_bracket": self.bracket,
            "certified": self.certified,
        })


@dataclass(frozen=True)
class TestFunction:
    family: str
    params: Dict[str, float]
    grid: Array
    u: NDArray[np.complex128]
    u_prime: NDArray[np.complex128]

    __test__ = False

    def scaled(self, factor: complex) -> "TestFunction":
        return TestFunction(
            family=self.family, params=self.params, grid=self.grid,
            u=factor * self.u, u_prime=factor * self.u_prime,
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "x": self.grid,
            "u_re": self.u.real, "u_im": self.u.imag,
            "u_prime_re": self.u_prime.real, "u_prime_im": self.u_prime.imag,
        })


@dataclass(frozen=True)
class DiscretizedOperator:
    """Tridiagonal P(h) - E +/- i eps with Dirichlet ends on a uniform grid."""
    dimension_mode: Literal["line", "radial"]
    grid: Array
    spacing: float
    diagonal: NDArray[np.complex128]
    off_diagonal: float
    weights: Array
    h: float
    E: float
    eps: float
    sign: int
    s: float
    L: float
    l: int = 0
    n: int = 1
    model: Optional[PotentialModel] = None

    @property
    def N(self) -> int:
        return int(self.grid.size)

    def banded(self, conjugate: bool = False) -> NDArray[np.complex128]:
        """(3, N) layout for scipy.linalg.solve_banded with (l, u) = (1, 1)."""
        ab = np.zeros((3, self.N), dtype=complex)
        ab[0, 1:] = self.off_diagonal
        ab[1, :] = np.conj(self.diagonal) if conjugate else self.diagonal
        ab[2, :-1] = self.off_diagonal
        return ab

    def to_dense(self) -> NDArray[np.complex128]:
        off = np.full(self.N - 1, self.off_diagonal, dtype=complex)
        return np.diag(self.diagonal) + np.diag(off, 1) + np.diag(off, -1)
