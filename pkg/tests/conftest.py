import numpy as np
import pytest

from carleman_lab.models import MollifierKernel
from carleman_lab.models.factories import (
    ConstructionParamsFactory,
    EnvelopeFactory,
    ExperimentConfigFactory,
    PotentialModelFactory,
)
from carleman_lab.services import (
    ArtifactPublisher,
    CarlemanConstructionService,
    CertificateService,
    MollifierService,
    PotentialClassService,
    ResolventLabService,
)


@pytest.fixture
def kernel():
    return MollifierKernel()


@pytest.fixture
def log_envelope():
    return EnvelopeFactory("log_decay")


@pytest.fixture
def narrow_envelope():
    """power_decay with scale 1/2: Phi1 vanishes on (0, a] for a of order one."""
    return EnvelopeFactory("power_decay", scale=0.5, nu=0.5)


@pytest.fixture
def m0_envelope():
    return EnvelopeFactory("one_over_rlog2")


@pytest.fixture
def free_model():
    return PotentialModelFactory("free_zero", "radial")


@pytest.fixture
def free_line_model():
    return PotentialModelFactory("free_zero", "line")


@pytest.fixture
def bump_model():
    return PotentialModelFactory("compact_bump", "radial", height=1.0, lo=0.5, hi=1.5)


@pytest.fixture
def potential_service():
    return PotentialClassService()


@pytest.fixture
def mollifier_service():
    return MollifierService()


@pytest.fixture
def certificate_service():
    return CertificateService()


@pytest.fixture
def construction_service(certificate_service, mollifier_service):
    return CarlemanConstructionService(
        certificate_service=certificate_service, mollifier_service=mollifier_service,
    )


@pytest.fixture
def resolvent_service():
    return ResolventLabService(max_iter=100000, max_doublings=1, seed=7)


@pytest.fixture
def linfty_params():
    return ConstructionParamsFactory("linfty", h=0.05, tau0=1.0, a0=4.0)


@pytest.fixture
def line_params():
    return ConstructionParamsFactory("holder_1d", h=0.1, tau0=1.0, delta=1.0)


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / "out"


@pytest.fixture
def publisher(output_dir):
    return ArtifactPublisher(output_dir, "0123456789abcdef")


@pytest.fixture
def experiment_config(output_dir):
    return ExperimentConfigFactory().model_copy(update={"output_dir": str(output_dir)})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
