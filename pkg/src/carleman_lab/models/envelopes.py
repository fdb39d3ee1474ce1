"""Closed-form decay envelopes m(r) and m0(r)."""

import numpy as np
from numpy.typing import ArrayLike, NDArray

from carleman_lab.schemas.potential import EnvelopeFn


def envelope_values(envelope: EnvelopeFn, r: ArrayLike) -> NDArray[np.float64]:
    """Evaluate the envelope at |r|; values lie in (0, scale] with scale <= 1."""
    r = np.abs(np.asarray(r, dtype=float))
    scale = envelope.params.get("scale", 1.0)
    if envelope.family == "power_decay":
        nu = envelope.params.get("nu", 0.5)
        values = (1.0 + r * r) ** (-0.5 * nu)
    elif envelope.family == "log_decay":
        values = 1.0 / np.log(np.e + r)
    elif envelope.family == "one_over_rlog2":
        values = 1.0 / (1.0 + r * np.log1p(r) ** 2)
    else:
        raise ValueError(f"Unknown envelope family: {envelope.family}")
    return scale * values


def floor_m0(r: ArrayLike) -> NDArray[np.float64]:
    """Lower floor (1 + |x| log^2(|x|+1))^-1 imposed on one-dimensional envelopes."""
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 / (1.0 + r * np.log1p(r) ** 2)


def japanese_bracket(r: ArrayLike) -> NDArray[np.float64]:
    r = np.asarray(r, dtype=float)
    return np.sqrt(1.0 + r * r)
