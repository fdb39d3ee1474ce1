from .potential import (
    EnvelopeFn,
    PotentialModel,
    ClassCertificate,
    LinftyDecayResult,
    DeltaScan,
    Holder1DResult,
    IntegrabilityReport,
    SupBoundReport,
)
from .construction import ConstructionParams
from .reports import (
    MollifierBoundReport,
    LemmaPhiReport,
    ProfileBoundReport,
    PhiGrowthReport,
    StabilityReport,
    CarlemanSummary,
    IntegratedCarlemanReport,
    EpsRule,
    ResolventRun,
    LinearFit,
    ExponentFit,
)
from .experiment import ExperimentConfig
from .error import ErrorReport

__all__ = [
    'EnvelopeFn', 'PotentialModel', 'ClassCertificate', 'LinftyDecayResult',
    'DeltaScan', 'Holder1DResult', 'IntegrabilityReport', 'SupBoundReport',
    'ConstructionParams',
    'MollifierBoundReport', 'LemmaPhiReport', 'ProfileBoundReport', 'PhiGrowthReport', 'StabilityReport',
    'CarlemanSummary', 'IntegratedCarlemanReport', 'EpsRule', 'ResolventRun',
    'LinearFit', 'ExponentFit',
    'ExperimentConfig',
    'ErrorReport'
]
