"""Mollifier kernel and smooth cutoffs built from the exp(-1/t) profile."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate


def _flat(t: NDArray[np.float64]) -> NDArray[np.float64]:
    positive = t > 0.0
    safe = np.where(positive, t, 1.0)
    return np.where(positive, np.exp(-1.0 / safe), 0.0)


def smooth_step(t: ArrayLike) -> NDArray[np.float64]:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    left = _flat(t)
    right = _flat(1.0 - t)
    return left / (left + right)


def omega(r: ArrayLike) -> NDArray[np.float64]:
    """Cutoff equal to 1 on [-1/2, 1/2] and supported in (-3/4, 3/4)."""
    r = np.abs(np.asarray(r, dtype=float))
    return smooth_step((0.75 - r) * 4.0)


def psi(r: ArrayLike, R_E: float) -> NDArray[np.float64]:
    """Cutoff equal to 1 on [0, R_E] and supported in (-1, R_E + 1)."""
    r = np.abs(np.asarray(r, dtype=float))
    return smooth_step(R_E + 1.0 - r)


def kernel_shape(s: ArrayLike) -> NDArray[np.float64]:
    """exp(1 - 1/(4s(1-s))) on (0, 1); peak value 1 at s = 1/2."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    q = np.where(inside, 4.0 * s * (1.0 - s), 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)


@lru_cache(maxsize=1)
def _shape_mass() -> float:
    mass, _ = integrate.quad(lambda s: float(kernel_shape(s)), 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return mass


@dataclass(frozen=True)
class MollifierKernel:
    """chi = shape / mass, supported in (0, 1), with unit integral."""
    mass: float = field(default_factory=_shape_mass)

    def chi(self, s: ArrayLike) -> NDArray[np.float64]:
        return kernel_shape(s) / self.mass

    def chi_prime(self, s: ArrayLike) -> NDArray[np.float64]:
        s = np.asarray(s, dtype=float)
        inside = (s > 0.0) & (s < 1.0)
        si = np.where(inside, s, 0.5)
        slope = (1.0 - 2.0 * si) / (4.0 * si ** 2 * (1.0 - si) ** 2)
        return np.where(inside, self.chi(si) * slope, 0.0)

    def integral(self) -> float:
        value, _ = integrate.quad(lambda s: float(self.chi(s)), 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        return value

    def moment(self, alpha: float) -> float:
        """Integral of s^alpha chi(s)."""
        value, _ = integrate.quad(
            lambda s: s ** alpha * float(self.chi(s)), 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200
        )
        return value

    def constant(self, alpha: float) -> float:
        """C_chi(alpha) = 2 * integral of |s^alpha chi'(s)| over (0, 1)."""
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        value, _ = integrate.quad(
            lambda s: s ** alpha * abs(float(self.chi_prime(s))),
            0.0, 1.0, points=[0.5], epsabs=0.0, epsrel=1e-12, limit=200,
        )
        return 2.0 * value
