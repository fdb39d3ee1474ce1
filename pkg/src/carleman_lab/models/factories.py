"""Factory functions for building models and experiment configs with sensible defaults."""

from typing import Any, Dict, Optional

from carleman_lab.schemas.construction import ConstructionParams
from carleman_lab.schemas.experiment import ExperimentConfig
from carleman_lab.schemas.potential import EnvelopeFn, PotentialModel


def PotentialModelFactory(
    family: str = "free_zero",
    dimension_mode: str = "radial",
    envelope: Optional[EnvelopeFn] = None,
    seed: int = 0,
    **params: float,
) -> PotentialModel:
    """Create a PotentialModel; keyword arguments become family parameters.

    Args:
        family: Potential family name (default: "free_zero")
        dimension_mode: "radial" or "line" (default: "radial")
        envelope: Envelope for sawtooth amplitudes (default: None)
        seed: Seed for random families (default: 0)
        **params: Family-specific real parameters

    Returns:
        Validated PotentialModel
    """
    return PotentialModel(
        family=family,
        params={key: float(value) for key, value in params.items()},
        dimension_mode=dimension_mode,
        envelope=envelope,
        seed=seed,
    )


def EnvelopeFactory(family: str = "log_decay", **params: float) -> EnvelopeFn:
    return EnvelopeFn(family=family, params={key: float(value) for key, value in params.items()})


def ConstructionParamsFactory(case: str = "linfty", **overrides: Any) -> ConstructionParams:
    """Create ConstructionParams for a case; unknown overrides are ignored.

    Args:
        case: "linfty", "holder_radial" or "holder_1d" (default: "linfty")
        **overrides: Field values replacing the defaults

    Returns:
        Validated ConstructionParams
    """
    valid_attributes = {
        "alpha", "eta", "tau0", "a0", "K", "h", "E", "E_infty", "delta", "h0", "tau0_reference",
    }
    data: Dict[str, Any] = {
        "case": case,
        "alpha": 0.0,
        "eta": 0.5,
        "tau0": 1.0,
        "a0": 1.0,
        "K": 6.0,
        "h": 0.1,
        "E": 1.0,
        "E_infty": 0.0,
    }
    if case == "holder_1d":
        data["delta"] = 1.0

    for key, value in overrides.items():
        if key in valid_attributes:
            data[key] = value

    return ConstructionParams(**data)


def ExperimentConfigFactory(**sections: Dict[str, Any]) -> ExperimentConfig:
    """Create an ExperimentConfig; each keyword replaces keys inside one section.

    Args:
        **sections: Section name -> partial mapping, e.g. ``constants={"alpha": 0.5}``

    Returns:
        Validated ExperimentConfig
    """
    data: Dict[str, Dict[str, Any]] = {
        "experiment": {"name": "factory", "case": "linfty", "seed": 0},
        "potential": {"family": "free_zero", "dimension_mode": "radial"},
        "envelope": {"family": "log_decay"},
        "constants": {"alpha": 0.0, "E": 1.0, "E_infty": 0.0, "s": 0.75},
        "grid": {"h": [0.2, 0.1, 0.05, 0.025, 0.0125], "r_max": 1.0e3, "n_check": 800, "n_profile": 400},
    }
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return ExperimentConfig.model_validate(data)
