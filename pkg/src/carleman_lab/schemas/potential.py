from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


PotentialFamily = Literal[
    "compact_bump",
    "sawtooth_holder",
    "step_oscillation",
    "random_fourier_nondecaying",
    "free_zero",
    "user_table",
    "constant",
    "linear",
    "arctan",
    "power_law",
    "double_bump",
]
EnvelopeFamily = Literal["power_decay", "log_decay", "one_over_rlog2"]
DimensionMode = Literal["line", "radial"]
ConditionKind = Literal["Linfty_decay", "holder_radial", "holder_1d"]


class EnvelopeFn(BaseModel):
    """Closed-form decay envelope m(r) (or m0 in one dimension)."""
    family: EnvelopeFamily
    params: Dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_params(self):
        scale = self.params.get("scale", 1.0)
        if not 0.0 < scale <= 1.0:
            raise ValueError(f"envelope scale must lie in (0, 1], got {scale}")
        if self.family == "power_decay" and self.params.get("nu", 0.5) <= 0.0:
            raise ValueError("power_decay requires nu > 0")
        return self


class PotentialModel(BaseModel):
    """A named, parameterized potential family."""
    family: PotentialFamily
    params: Dict[str, float] = Field(default_factory=dict)
    dimension_mode: DimensionMode = "radial"
    bound_C_V: Optional[float] = Field(None, description="Declared upper bound on sup |V|")
    envelope: Optional[EnvelopeFn] = Field(None, description="Envelope used by sawtooth_holder amplitudes")
    table_path: Optional[str] = Field(None, description="Two-column (r, V) text file for user_table")
    seed: int = 0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_family_inputs(self):
        if self.family == "user_table" and not self.table_path:
            raise ValueError("user_table potentials require table_path")
        if self.family == "sawtooth_holder":
            alpha = self.params.get("alpha", 0.5)
            if not 0.0 <= alpha <= 1.0:
                raise ValueError(f"sawtooth_holder alpha must lie in [0, 1], got {alpha}")
        return self


class ClassCertificate(BaseModel):
    """Outcome of the hypothesis checks for one potential."""
    condition: ConditionKind
    alpha: float = Field(ge=0.0, le=1.0)
    c_const: float = Field(ge=0.0, description="c1, c2 or c0 depending on the condition")
    V_infty: float
    delta_V: float = Field(gt=0.0)
    R_EV: float = Field(ge=0.0)
    E: float
    E_infty: float
    C_V: float = Field(0.0, description="Measured sup of |V| over the check grid")
    tail_window: Tuple[float, float] = (0.0, 0.0)
    delta_at_grid_boundary: bool = False

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_energies(self):
        if not self.E > self.E_infty:
            raise ValueError(f"E={self.E} must exceed E_infty={self.E_infty}")
        if self.V_infty > self.E_infty:
            raise ValueError(f"V_infty={self.V_infty} exceeds E_infty={self.E_infty}")
        return self


class LinftyDecayResult(BaseModel):
    passes: bool
    c1: float
    trend: List[Tuple[float, float]] = Field(default_factory=list, description="(r_max, c1) per nested window")


class DeltaScan(BaseModel):
    delta: float
    delta_lower: float
    exceeded: bool
    at_grid_boundary: bool = False


class Holder1DResult(BaseModel):
    c0: float
    delta0: float
    c0_used: float
    at_grid_boundary: bool = False


class IntegrabilityReport(BaseModel):
    usage: Literal["m", "m0"]
    windows: List[Tuple[float, float]]
    increments: List[float]
    converged: bool


class SupBoundReport(BaseModel):
    C_V: float
    declared: Optional[float] = None
    within_declared: bool = True
