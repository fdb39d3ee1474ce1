from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class MollifierBoundReport(BaseModel):
    """Pointwise check of the smoothed-potential bounds (max of actual/bound per bound)."""
    case: str
    gamma: float
    sup_envelope_ok: bool
    max_ratio_R: float
    max_ratio_Vh_prime: float
    max_weighted_R: float
    max_abs_Vh_prime: float
    C_chi: float
    passes: bool


class LemmaPhiReport(BaseModel):
    passes: bool
    l1_norm: float = Field(description="Quadrature of (s+1)^-2 Phi1 over the grid")
    max_slack: float
    lower_violation: float
    upper_violation: float


class ProfileBoundReport(BaseModel):
    """Pointwise bounds of an integrated profile; constants are the smallest that make each bound hold."""
    case: str
    h: float
    passes: bool
    checks: Dict[str, bool]
    constants: Dict[str, float]


class PhiGrowthReport(BaseModel):
    """Slope of max|phi0|/tau0 against log(1/h) next to (1 - alpha)/((1 - eta/2)(3 + alpha))."""
    h_values: List[float]
    phi0_max: List[float]
    fitted_coefficient: float
    predicted_coefficient: float
    relative_error: float
    r_squared: float
    passes: bool


class StabilityReport(BaseModel):
    values: Dict[str, List[float]]
    spread: Dict[str, float]
    stable: Dict[str, bool]


class CarlemanSummary(BaseModel):
    h: float
    min_margin: float
    argmin: float
    chain_algebra_holds: bool
    bracket_ge_target: bool
    passes: bool
    in_cutoff_support: Optional[bool] = None


class IntegratedCarlemanReport(BaseModel):
    h: float
    eps: float
    sign: Literal[1, -1]
    lhs: List[float]
    rhs: List[float]
    multipliers: List[float]
    max_multiplier: float
    log_multiplier_times_h: float
    precondition_met: bool = True


class EpsRule(BaseModel):
    """epsilon as a function of h: constant, or coefficient * h**exponent."""
    kind: Literal["constant", "power"] = "power"
    coefficient: float = Field(1.0, gt=0.0)
    exponent: float = 1.0

    def __call__(self, h: float) -> float:
        if self.kind == "constant":
            return self.coefficient
        return self.coefficient * h ** self.exponent


class ResolventRun(BaseModel):
    h: float
    eps: float
    E: float
    s: float
    L: float
    N: int
    g_value: float
    converged: bool
    sign: Literal[1, -1] = 1
    l: int = 0
    n: int = 1
    iterations: int = 0
    resolution_ok: bool = True

    model_config = ConfigDict(frozen=True)

    @field_validator("g_value")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0.0:
            raise ValueError("g_value must be positive")
        return value

    @field_validator("s")
    @classmethod
    def _s_range(cls, value: float) -> float:
        if not value > 0.5:
            raise ValueError("s must exceed 1/2")
        return value


class LinearFit(BaseModel):
    slope: float
    intercept: float
    r_squared: float
    residuals: List[float]
    rss: float


class ExponentFit(BaseModel):
    """Least-squares fits of log g against the theorem shapes."""
    h_range: List[float]
    n_points: int = Field(ge=5)
    sigma_alpha: float
    inverse_h: LinearFit = Field(description="log g against 1/h; slope C")
    loglog: Optional[LinearFit] = Field(None, description="log log g against log(1/h); slope p")
    theorem_shape: LinearFit = Field(description="log g against h^(-1-sigma)(sigma log(1/h) + 1)")
    preferred_model: Literal["inverse_h", "theorem_shape"]
    excluded_runs: int = 0
