from .envelopes import envelope_values, floor_m0, japanese_bracket
from .kernels import MollifierKernel, smooth_step, omega, psi
from .potentials import evaluate, breakpoints
from .grids import (
    SmoothedPotential,
    PhaseWeightDraft,
    PhaseWeightProfile,
    ConjugationCoefficients,
    CarlemanReport,
    TestFunction,
    DiscretizedOperator,
)
