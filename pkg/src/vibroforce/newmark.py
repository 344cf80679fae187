"""Linear Newmark-beta integration of ``A a + D v + B d = f``.

``A``, ``D``, ``B`` may be non-symmetric (the coupled u-p pencil is), so
the effective stiffness is LU-factored rather than Cholesky-factored.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

__all__ = [
    "IntegrationError",
    "NewmarkParams",
    "State",
    "SecondOrderSystem",
    "Trajectory",
    "effective_stiffness",
    "internal_force",
    "step",
    "integrate",
    "amplification_matrix",
]


class IntegrationError(ValueError):
    pass


@dataclass(frozen=True)
class NewmarkParams:
    """Newmark coefficients; defaults are the average-acceleration rule."""

    dt: float
    beta: float = 0.25
    delta: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.beta <= 0.5:
            raise ValueError(f"beta must lie in (0, 0.5], got {self.beta}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")

    @property
    def unconditionally_stable(self) -> bool:
        # relative slack so that boundary rules such as (0.3025, 0.6) are not lost to roundoff
        return self.delta >= 0.5 and self.beta >= 0.25 * (0.5 + self.delta) ** 2 * (1 - 1e-12)

    @property
    def coefficients(self) -> tuple[float, float, float, float, float, float]:
        """``(c0..c5)`` multiplying (d, v, a) in the mass and damping predictors.

        r = A (c0 d + c2 v + c3 a) + D (c1 d + c4 v + c5 a)
        """
        b, g, dt = self.beta, self.delta, self.dt
        return (
            1.0 / (b * dt * dt),
            g / (b * dt),
            1.0 / (b * dt),
            1.0 / (2.0 * b) - 1.0,
            g / b - 1.0,
            g * dt / (2.0 * b) - dt,
        )


class State(NamedTuple):
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "State":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    def scaled(self, alpha: float) -> "State":
        return State(alpha * self.d, alpha * self.v, alpha * self.a)


def effective_stiffness(A, D, B, params: NewmarkParams):
    """``K = B + A/(beta dt^2) + D delta/(beta dt)`` and its LU factors."""
    A, D, B = (np.asarray(m, dtype=float) for m in (A, D, B))
    if not (A.shape == D.shape == B.shape and A.shape[0] == A.shape[1]):
        raise IntegrationError(f"A, D, B must be square and equal-sized: {A.shape}, {D.shape}, {B.shape}")
    c0, c1 = params.coefficients[:2]
    K = B + c0 * A + c1 * D
    with warnings.catch_warnings():
        # singularity is reported below with a clearer message
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    u = np.abs(np.diag(lu))
    if u.size and u.min() <= np.finfo(float).eps * u.max() * K.shape[0]:
        raise IntegrationError("effective stiffness is singular (rigid mode without mass or damping path?)")
    return K, (lu, piv)


def internal_force(A, D, s: State, params: NewmarkParams) -> np.ndarray:
    """Predictor load carried over from the state at ``t``."""
    c0, c1, c2, c3, c4, c5 = params.coefficients
    return A @ (c0 * s.d + c2 * s.v + c3 * s.a) + D @ (c1 * s.d + c4 * s.v + c5 * s.a)


@dataclass(frozen=True, eq=False)
class SecondOrderSystem:
    """Operators of ``A a + D v + B d = f`` with a per-params factorization cache."""

    A: np.ndarray
    D: np.ndarray
    B: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for name in ("A", "D", "B"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_reduced(cls, red) -> "SecondOrderSystem":
        return cls(red.Ahat, red.Dhat, red.Bhat)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def factor(self, params: NewmarkParams):
        key = (params.beta, params.delta, params.dt)
        if key not in self._cache:
            # one entry per params; a new dt replaces the old factorization
            self._cache.clear()
            self._cache[key] = effective_stiffness(self.A, self.D, self.B, params)[1]
        return self._cache[key]

    def residual(self, s: State, f: np.ndarray) -> np.ndarray:
        return self.A @ s.a + self.D @ s.v + self.B @ s.d - f


def step(system: SecondOrderSystem, s: State, f_next: np.ndarray, params: NewmarkParams) -> State:
    """Advance one step; ``f_next`` is the load at ``t + dt``."""
    f_next = np.asarray(f_next, dtype=float)
    if not (np.all(np.isfinite(f_next)) and all(np.all(np.isfinite(x)) for x in s)):
        raise IntegrationError("non-finite state or load")
    c0, _, c2, c3, _, _ = params.coefficients
    r = internal_force(system.A, system.D, s, params)
    d = scipy.linalg.lu_solve(system.factor(params), f_next + r, check_finite=False)
    a = c0 * (d - s.d) - c2 * s.v - c3 * s.a
    v = s.v + params.dt * ((1.0 - params.delta) * s.a + params.delta * a)
    return State(d, v, a)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states; arrays are (n_samples, n)."""

    t: np.ndarray
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def state(self, k: int) -> State:
        return State(self.d[k], self.v[k], self.a[k])

    def mapped(self, T: np.ndarray) -> "Trajectory":
        """Apply a basis to every sample (``T @ x`` row-wise)."""
        return Trajectory(self.t, self.d @ T.T, self.v @ T.T, self.a @ T.T)


def integrate(system: SecondOrderSystem, s0: State, loads: np.ndarray,
              params: NewmarkParams, t0: float = 0.0, initial_acceleration=None) -> Trajectory:
    """March through ``loads`` (n_samples x n, sampled every ``dt`` from ``t0``).

    Row 0 of ``loads`` is the load at ``t0``. Without an explicit
    ``initial_acceleration`` the start is made consistent,
    ``a0 = A^-1 (f0 - D v0 - B d0)``.
    """
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    if loads.shape[1] != system.n:
        raise IntegrationError(f"load series has {loads.shape[1]} columns, system has {system.n} DOFs")
    if any(len(x) != system.n for x in s0):
        raise IntegrationError("initial state size does not match the system")
    n_samples = loads.shape[0]
    if initial_acceleration is None:
        a0 = np.linalg.solve(system.A, loads[0] - system.D @ s0.v - system.B @ s0.d)
    else:
        a0 = np.asarray(initial_acceleration, dtype=float)
    d = np.empty((n_samples, system.n))
    v = np.empty_like(d)
    a = np.empty_like(d)
    s = State(np.asarray(s0.d, float), np.asarray(s0.v, float), a0)
    d[0], v[0], a[0] = s
    for k in range(1, n_samples):
        s = step(system, s, loads[k], params)
        d[k], v[k], a[k] = s
    t = t0 + params.dt * np.arange(n_samples)
    return Trajectory(t, d, v, a)


def amplification_matrix(omega: float, params: NewmarkParams, zeta: float = 0.0) -> np.ndarray:
    """3x3 one-step map of (d, v, a) for a unit-mass modal oscillator."""
    k, c = omega**2, 2.0 * zeta * omega
    sys_ = SecondOrderSystem(np.eye(1), np.array([[c]]), np.array([[k]]))
    cols = []
    for e in np.eye(3):
        s = State(e[:1], e[1:2], e[2:])
        cols.append(np.concatenate(step(sys_, s, np.zeros(1), params)))
    return np.column_stack(cols)
