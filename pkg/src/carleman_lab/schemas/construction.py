from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


CaseKind = Literal["linfty", "holder_radial", "holder_1d"]


class ConstructionParams(BaseModel):
    """Parameters of one phase/weight construction.

    sigma, rho, M and a are derived and therefore always satisfy their defining formulas.
    """
    case: CaseKind
    alpha: float = Field(ge=0.0, le=1.0)
    eta: float = Field(gt=0.0, lt=1.0)
    tau0: float = Field(ge=1.0)
    a0: float = Field(1.0, ge=1.0)
    K: float = Field(gt=0.0)
    h: float = Field(gt=0.0, le=1.0)
    E: float
    E_infty: float
    delta: Optional[float] = Field(None, gt=0.0, description="One-dimensional weight scale")
    h0: Optional[float] = Field(None, description="Largest h for which the margin was found nonnegative")
    tau0_reference: Optional[float] = None

    model_config = ConfigDict(frozen=True)

    @computed_field
    @property
    def sigma(self) -> float:
        return (1.0 - self.alpha) / (3.0 + self.alpha)

    @computed_field
    @property
    def rho(self) -> float:
        return 2.0 / (3.0 + self.alpha)

    @computed_field
    @property
    def M(self) -> float:
        return 2.0 * self.sigma / (2.0 - self.eta)

    @computed_field
    @property
    def a(self) -> float:
        return self.a0 * self.h ** (-self.M)

    @property
    def mollifier_rho(self) -> float:
        # the pure decay case mollifies formally with rho = 1
        return 1.0 if self.case == "linfty" else self.rho

    @model_validator(mode="after")
    def _check_case(self):
        if not self.E > self.E_infty:
            raise ValueError(f"E={self.E} must exceed E_infty={self.E_infty}")
        if self.case == "holder_1d" and self.delta is None:
            raise ValueError("holder_1d constructions require delta")
        if self.case == "linfty" and self.alpha != 0.0:
            raise ValueError("the linfty case is constructed with alpha = 0")
        return self

    def at(self, h: float) -> "ConstructionParams":
        """Same construction at another semiclassical parameter."""
        return self.model_copy(update={"h": h})
