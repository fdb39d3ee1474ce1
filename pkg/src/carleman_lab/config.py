import os
from dotenv import load_dotenv

load_dotenv()

OUTPUT_DIR = os.getenv("CARLEMAN_LAB_OUTPUT_DIR", "results")
DEFAULT_K = float(os.getenv("CARLEMAN_LAB_DEFAULT_K", "6.0"))
DEFAULT_THREADS = int(os.getenv("CARLEMAN_LAB_THREADS", "1"))
DEFAULT_SEED = int(os.getenv("CARLEMAN_LAB_SEED", "0"))

# Quadrature: relative agreement between successive panel refinements
QUAD_REL_TOL = float(os.getenv("CARLEMAN_LAB_QUAD_REL_TOL", "1e-9"))
QUAD_MAX_PANELS = int(os.getenv("CARLEMAN_LAB_QUAD_MAX_PANELS", "256"))
QUAD_ORDER = int(os.getenv("CARLEMAN_LAB_QUAD_ORDER", "16"))

# Closed-form cross-check of integrated profiles (relative, on log scale)
PROFILE_XCHECK_RTOL = float(os.getenv("CARLEMAN_LAB_PROFILE_XCHECK_RTOL", "1e-8"))

# Power iteration on the weighted resolvent
POWER_ITER_TOL = float(os.getenv("CARLEMAN_LAB_POWER_ITER_TOL", "1e-12"))
POWER_ITER_MAX = int(os.getenv("CARLEMAN_LAB_POWER_ITER_MAX", "5000"))
BOX_DOUBLING_TOL = float(os.getenv("CARLEMAN_LAB_BOX_DOUBLING_TOL", "0.01"))
BOX_MAX_DOUBLINGS = int(os.getenv("CARLEMAN_LAB_BOX_MAX_DOUBLINGS", "3"))

# Envelope tail test and stability tolerances of reported constants
ENVELOPE_TAIL_TOL = float(os.getenv("CARLEMAN_LAB_ENVELOPE_TAIL_TOL", "1e-2"))
LINFTY_GROWTH_TOL = float(os.getenv("CARLEMAN_LAB_LINFTY_GROWTH_TOL", "1e-3"))
CONSTANT_STABILITY_TOL = float(os.getenv("CARLEMAN_LAB_CONSTANT_STABILITY_TOL", "0.2"))
PHI_GROWTH_TOL = float(os.getenv("CARLEMAN_LAB_PHI_GROWTH_TOL", "0.1"))
MULTIPLIER_STABILITY_TOL = float(os.getenv("CARLEMAN_LAB_MULTIPLIER_STABILITY_TOL", "0.25"))
