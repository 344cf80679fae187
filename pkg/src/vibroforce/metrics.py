"""Geers error measures, measurement noise and measurement assembly."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .newmark import Trajectory
from .system_model import SelectionConfig

__all__ = [
    "RNG_DESCRIPTION",
    "NoiseSpec",
    "GeersErrors",
    "make_rng",
    "add_noise",
    "geers_errors",
    "assemble_measurement_vector",
]

# recorded in run metadata so noise streams can be regenerated elsewhere
RNG_DESCRIPTION = "numpy PCG64 bit generator, standard normals by ziggurat (Generator.standard_normal)"


@dataclass(frozen=True)
class NoiseSpec:
    tau: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")


@dataclass(frozen=True)
class GeersErrors:
    mag: float
    phase: float
    comp: float

    @classmethod
    def from_parts(cls, mag: float, phase: float) -> "GeersErrors":
        return cls(mag, phase, math.sqrt(mag * mag + phase * phase))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def add_noise(signal: np.ndarray, spec: NoiseSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Add ``tau * sigma * N(0, 1)`` per channel.

    ``signal`` is (n_samples,) or (n_samples, n_channels); ``sigma`` is each
    channel's sample standard deviation (n-1 denominator). A zero-variance
    channel is returned unchanged.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.size == 0:
        raise ValueError("empty signal")
    if spec.tau == 0:
        return signal.copy()
    rng = rng if rng is not None else make_rng(spec.seed)
    sigma = signal.std(axis=0, ddof=1) if signal.shape[0] > 1 else np.zeros(signal.shape[1:])
    return signal + spec.tau * sigma * rng.standard_normal(signal.shape)


def geers_errors(identified, reference) -> GeersErrors:
    """Magnitude, phase and comprehensive Geers measures.

    The phase term uses ``|sum(x y)|``, so a sign-flipped signal scores zero
    error.
    """
    x = np.asarray(identified, dtype=float).ravel()
    y = np.asarray(reference, dtype=float).ravel()
    if x.shape != y.shape or x.size < 2:
        raise ValueError(f"need equal-length series of at least 2 samples, got {x.size} and {y.size}")
    sxx = float(np.dot(x, x))
    syy = float(np.dot(y, y))
    if syy == 0.0:
        raise ValueError("reference signal is identically zero")
    sxy = float(np.dot(x, y))
    mag = math.sqrt(sxx) / math.sqrt(syy) - 1.0
    if sxx == 0.0:
        phase = 1.0
    else:
        phase = 1.0 - math.sqrt(abs(sxy)) / math.sqrt(math.sqrt(sxx) * math.sqrt(syy))
    # clamp the last-ulp excursions of the Cauchy-Schwarz bound
    return GeersErrors.from_parts(mag, min(max(phase, 0.0), 1.0))


def assemble_measurement_vector(traj: Trajectory, selection: SelectionConfig) -> np.ndarray:
    """Stack measured channels per sample: displacements, velocities, accelerations."""
    n = traj.d.shape[1]
    selection.validate(n)
    blocks = [traj.d[:, list(selection.disp_idx)],
              traj.v[:, list(selection.vel_idx)],
              traj.a[:, list(selection.acc_idx)]]
    return np.hstack(blocks)
