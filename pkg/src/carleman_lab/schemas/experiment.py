from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from carleman_lab.config import DEFAULT_K
from carleman_lab.schemas.construction import CaseKind
from carleman_lab.schemas.potential import EnvelopeFn, PotentialModel
from carleman_lab.schemas.reports import EpsRule


StageName = Literal[
    "check-potential", "mollify", "construct", "certify", "carleman", "resolvent-sweep", "fit", "all",
]


class ExperimentSection(BaseModel):
    name: str = Field("experiment", min_length=1)
    case: CaseKind
    seed: int = Field(0, ge=0)

    model_config = ConfigDict(extra="forbid")


class ConstantsSection(BaseModel):
    alpha: float = Field(0.0, ge=0.0, le=1.0)
    E: float = 1.0
    E_infty: float = 0.0
    s: float = Field(0.75, gt=0.5, lt=1.0)
    eta: Optional[float] = Field(None, gt=0.0, lt=1.0)
    K: float = Field(DEFAULT_K, gt=0.0)
    c0: Optional[float] = Field(None, gt=0.0, description="Declared one-dimensional modulus bound")
    tau0: Optional[float] = Field(None, ge=1.0)
    a0: Optional[float] = Field(None, ge=1.0)
    delta: Optional[float] = Field(None, gt=0.0)

    model_config = ConfigDict(extra="forbid")

    @property
    def eta_value(self) -> float:
        return self.eta if self.eta is not None else 2.0 * self.s - 1.0

    @model_validator(mode="after")
    def _check_energies(self):
        if not self.E > self.E_infty:
            raise ValueError(f"E={self.E} must exceed E_infty={self.E_infty}")
        return self


class GridSection(BaseModel):
    h: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025, 0.0125])
    r_max: float = Field(1.0e4, gt=0.0, description="Extent of the hypothesis-check grid")
    n_check: int = Field(4000, ge=100)
    n_profile: int = Field(2000, ge=100)
    n_mollify: int = Field(600, ge=50)
    y_min: float = Field(1.0e-6, gt=0.0)
    y_max: float = Field(1.0, gt=0.0)
    n_y: int = Field(40, ge=5)

    model_config = ConfigDict(extra="forbid")

    @field_validator("h")
    @classmethod
    def _h_range(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("h grid must not be empty")
        for value in values:
            if not 0.0 < value <= 1.0:
                raise ValueError(f"h values must lie in (0, 1], got {value}")
        return sorted(values, reverse=True)


class ResolventSection(BaseModel):
    n: int = Field(1, description="Spatial dimension: 1, or >= 3 for radial modes")
    modes: List[int] = Field(default_factory=lambda: [0])
    eps_rule: EpsRule = Field(default_factory=EpsRule)
    L: Optional[float] = Field(None, gt=0.0)
    N: Optional[int] = Field(None, ge=200)
    signs: List[Literal[1, -1]] = Field(default_factory=lambda: [1])
    eps_ladder: List[float] = Field(
        default_factory=list, description="Decreasing eps values searched for the smallest trustworthy one at the smallest h",
    )

    model_config = ConfigDict(extra="forbid")

    @field_validator("n")
    @classmethod
    def _dimension(cls, value: int) -> int:
        if value == 2 or value < 1:
            raise ValueError("dimension must be 1 or at least 3")
        return value

    @field_validator("eps_ladder")
    @classmethod
    def _positive_eps(cls, values: List[float]) -> List[float]:
        if any(value <= 0.0 for value in values):
            raise ValueError("eps_ladder values must be positive")
        return values


class TestFunctionSection(BaseModel):
    family: Literal["gaussian_bump", "hermite_packet", "random_band_limited"] = "random_band_limited"
    count: int = Field(10, ge=1)
    n_points: int = Field(4097, ge=257)
    eps: float = Field(0.1, ge=0.0)

    model_config = ConfigDict(extra="forbid")


class ExperimentConfig(BaseModel):
    """Validated experiment file."""
    experiment: ExperimentSection
    potential: PotentialModel
    envelope: EnvelopeFn
    constants: ConstantsSection = Field(default_factory=ConstantsSection)
    grid: GridSection = Field(default_factory=GridSection)
    resolvent: ResolventSection = Field(default_factory=ResolventSection)
    test_functions: TestFunctionSection = Field(default_factory=TestFunctionSection)
    output_dir: Optional[str] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def _check_case_geometry(self):
        case = self.experiment.case
        mode = self.potential.dimension_mode
        if case == "holder_1d" and mode != "line":
            raise ValueError("holder_1d requires potential.dimension_mode = 'line'")
        if case != "holder_1d" and mode != "radial":
            raise ValueError(f"{case} requires potential.dimension_mode = 'radial'")
        if case == "linfty" and self.constants.alpha != 0.0:
            raise ValueError("constants.alpha must be 0 in the linfty case")
        return self
