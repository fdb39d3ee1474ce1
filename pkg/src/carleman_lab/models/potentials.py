"""Vectorized potential families and their non-smooth points."""

from functools import lru_cache
from typing import List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from carleman_lab.models.envelopes import envelope_values
from carleman_lab.models.kernels import smooth_step
from carleman_lab.schemas.potential import EnvelopeFn, PotentialModel

DEFAULT_SAWTOOTH_ENVELOPE = EnvelopeFn(family="power_decay", params={"nu": 0.5})


@lru_cache(maxsize=16)
def _load_table(path: str) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] < 2:
        raise ValueError(f"user_table file {path} must have two columns (r, V)")
    order = np.argsort(data[:, 0])
    return data[order, 0], data[order, 1]


@lru_cache(maxsize=16)
def _fourier_modes(seed: int, n_modes: int, amplitude: float) -> Tuple[NDArray, NDArray, NDArray]:
    rng = np.random.default_rng(seed)
    frequencies = rng.uniform(0.5, 3.0, size=n_modes)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
    weights = rng.uniform(0.5, 1.0, size=n_modes)
    weights *= amplitude / weights.sum()
    return frequencies, phases, weights


def _bump(t: NDArray[np.float64]) -> NDArray[np.float64]:
    inside = np.abs(t) < 1.0
    q = np.where(inside, 1.0 - t * t, 1.0)
    return np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)


def _dist_to_lattice(x: NDArray[np.float64], tau: float) -> NDArray[np.float64]:
    frac = np.mod(x, tau)
    return np.minimum(frac, tau - frac)


def sawtooth_amplitude(model: PotentialModel, r: ArrayLike) -> NDArray[np.float64]:
    """A(r) = c <r>^-3 m^2(r)."""
    r = np.abs(np.asarray(r, dtype=float))
    envelope = model.envelope or DEFAULT_SAWTOOTH_ENVELOPE
    c = model.params.get("c", 1.0)
    return c * (1.0 + r * r) ** -1.5 * envelope_values(envelope, r) ** 2


def evaluate(model: PotentialModel, x: ArrayLike) -> NDArray[np.float64]:
    """Evaluate V at the given points; no domain check."""
    x = np.asarray(x, dtype=float)
    p = model.params
    family = model.family

    if family == "free_zero":
        return np.zeros_like(x)
    if family == "constant":
        return np.full_like(x, p.get("value", 1.0))
    if family == "linear":
        return p.get("slope", 1.0) * x
    if family == "compact_bump":
        height = p.get("height", 1.0)
        lo, hi = p.get("lo", 0.0), p.get("hi", 1.0)
        edge = p.get("edge", 0.0)
        if edge <= 0.0:
            return np.where((x >= lo) & (x <= hi), height, 0.0)
        return height * smooth_step((x - lo) / edge) * smooth_step((hi - x) / edge)
    if family == "sawtooth_holder":
        alpha = p.get("alpha", 0.5)
        tau = p.get("tau", 0.5)
        dist = _dist_to_lattice(x, tau)
        amplitude = sawtooth_amplitude(model, x)
        if alpha == 0.0:
            return amplitude * (dist > 0.25 * tau)
        return amplitude * dist ** alpha
    if family == "step_oscillation":
        amplitude = p.get("amplitude", 0.25)
        period = p.get("period", 1.0)
        return amplitude * np.sign(np.sin(2.0 * np.pi * x / period))
    if family == "random_fourier_nondecaying":
        frequencies, phases, weights = _fourier_modes(
            model.seed, int(p.get("n_modes", 8)), p.get("amplitude", 0.25)
        )
        return np.cos(np.multiply.outer(x, frequencies) + phases) @ weights
    if family == "user_table":
        nodes, values = _load_table(model.table_path)
        return np.interp(x, nodes, values)
    if family == "arctan":
        return p.get("amplitude", 1.0) * np.arctan(x / p.get("scale", 1.0))
    if family == "power_law":
        return p.get("c", 1.0) * (1.0 + x * x) ** (-0.5 * p.get("p", 2.0))
    if family == "double_bump":
        height = p.get("height", 2.0)
        center = p.get("center", 2.0)
        width = p.get("width", 1.0)
        values = _bump((x - center) / width)
        if model.dimension_mode == "line":
            values = values + _bump((x + center) / width)
        return height * values
    raise ValueError(f"Unknown potential family: {family}")


def breakpoints(model: PotentialModel, lo: float, hi: float) -> List[float]:
    """Points in (lo, hi) where V or its derivative jumps."""
    p = model.params
    points: List[float] = []
    if model.family == "compact_bump" and p.get("edge", 0.0) <= 0.0:
        points = [p.get("lo", 0.0), p.get("hi", 1.0)]
    elif model.family in ("sawtooth_holder", "step_oscillation"):
        if model.family == "sawtooth_holder":
            tau = p.get("tau", 0.5)
            if p.get("alpha", 0.5) == 0.0:
                offsets, spacing = (0.25 * tau, 0.75 * tau), tau
            else:
                offsets, spacing = (0.0, 0.5 * tau), tau
        else:
            spacing = p.get("period", 1.0)
            offsets = (0.0, 0.5 * spacing)
        lattice = np.arange(np.floor(lo / spacing), np.ceil(hi / spacing) + 1.0) * spacing
        points = np.concatenate([lattice + offset for offset in offsets]).tolist()
    elif model.family == "user_table":
        nodes, _ = _load_table(model.table_path)
        points = [float(node) for node in nodes]
    return sorted(point for point in set(points) if lo < point < hi)
