from .potential_classes import (
    PotentialClassService,
    PotentialDomainError,
    DegenerateEnvelopeError,
    HypothesisViolationError,
    ArgumentError,
)
from .mollifier import MollifierService, MollificationError
from .certificate import CertificateService, GridMismatchError
from .carleman_construct import (
    CarlemanConstructionService,
    ConstructionError,
    IntegrationCrossCheckError,
    ConstructionSearchError,
)
from .resolvent_lab import ResolventLabService, ResolventError, FitError
from .artifact_publisher import ArtifactPublisher, ArtifactWriteError

__all__ = [
    'PotentialClassService', 'PotentialDomainError', 'DegenerateEnvelopeError',
    'HypothesisViolationError', 'ArgumentError',
    'MollifierService', 'MollificationError',
    'CertificateService', 'GridMismatchError',
    'CarlemanConstructionService', 'ConstructionError', 'IntegrationCrossCheckError',
    'ConstructionSearchError',
    'ResolventLabService', 'ResolventError', 'FitError',
    'ArtifactPublisher', 'ArtifactWriteError',
]
