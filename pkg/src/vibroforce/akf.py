"""Augmented Kalman filter on the reduced vibroacoustic model.

The unknown force is appended to the first-order state ``[d; v]`` and
modelled as a random walk. Discretization is exact for a zero-order-hold
input, so the filter's own model error comes only from the ZOH assumption
and the random-walk prior.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .rom import ReducedModel
from .system_model import SelectionConfig

__all__ = [
    "FilterError",
    "StateSpaceModel",
    "AugmentedModel",
    "FilterState",
    "FilterResult",
    "build_state_space",
    "discretize",
    "augment",
    "measurement_update",
    "time_update",
    "run_filter",
]


class FilterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    Ac: np.ndarray
    Bc: np.ndarray


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    Aa: np.ndarray
    Ga: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    n_state: int
    dt: float

    @property
    def n_forces(self) -> int:
        return self.Aa.shape[0] - self.n_state


@dataclass(frozen=True)
class FilterState:
    x: np.ndarray
    P: np.ndarray


def _solve_mass(rom: ReducedModel, rhs: np.ndarray) -> np.ndarray:
    lu, piv = scipy.linalg.lu_factor(rom.Ahat)
    u = np.abs(np.diag(lu))
    if u.min() <= np.finfo(float).eps * u.max() * len(u):
        raise FilterError("reduced mass matrix is singular")
    return scipy.linalg.lu_solve((lu, piv), rhs)


def build_state_space(rom: ReducedModel, S_f: np.ndarray) -> StateSpaceModel:
    """``x' = Ac x + Bc f`` for ``x = [d; v]``."""
    m = rom.size
    rhs = np.hstack([rom.Bhat, rom.Dhat, rom.load_operator(S_f)])
    sol = _solve_mass(rom, rhs)
    AinvB, AinvD, AinvF = sol[:, :m], sol[:, m:2 * m], sol[:, 2 * m:]
    Ac = np.block([[np.zeros((m, m)), np.eye(m)], [-AinvB, -AinvD]])
    Bc = np.vstack([np.zeros((m, AinvF.shape[1])), AinvF])
    return StateSpaceModel(Ac, Bc)


def discretize(ssm: StateSpaceModel, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold ``(Ad, Bd)`` from one exponential of the input-augmented block.

    ``expm([[Ac, Bc], [0, 0]] dt) = [[Ad, Bd], [0, I]]``, which holds for
    singular ``Ac`` as well.
    """
    if not dt > 0:
        raise FilterError(f"dt must be positive, got {dt}")
    n, k = ssm.Bc.shape
    block = np.zeros((n + k, n + k))
    block[:n, :n] = ssm.Ac
    block[:n, n:] = ssm.Bc
    E = scipy.linalg.expm(block * dt)
    if not np.all(np.isfinite(E)):
        raise FilterError(f"matrix exponential overflowed for dt={dt}")
    return E[:n, :n], E[:n, n:]


def augment(Ad: np.ndarray, Bd: np.ndarray, rom: ReducedModel, selection: SelectionConfig,
            Q: np.ndarray, R: np.ndarray, dt: float = float("nan")) -> AugmentedModel:
    """Random-walk force augmentation and the feed-through measurement matrix.

    Displacement, velocity and acceleration rows are stacked in that order,
    each using the zero-padded selectors so the acceleration rows carry
    ``-S_a T Ahat^-1 [Bhat, Dhat]`` and the force feed-through.
    """
    m = rom.size
    n_f = Bd.shape[1]
    S_d, S_v, S_a, S_f = selection.matrices(rom.n_dof)
    if S_f.shape[1] != n_f:
        raise FilterError(f"selection has {S_f.shape[1]} forces, Bd has {n_f} columns")
    nz = selection.n_meas
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    if Q.shape != (2 * m + n_f,) * 2 or R.shape != (nz, nz):
        raise FilterError(f"Q must be {(2 * m + n_f,) * 2} and R {(nz, nz)}; got {Q.shape}, {R.shape}")
    if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
        raise FilterError("R must be symmetric positive definite")
    if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(Q).min() < -1e-12 * max(np.abs(Q).max(), 1e-300):
        raise FilterError("Q must be symmetric positive semidefinite")

    Aa = np.zeros((2 * m + n_f, 2 * m + n_f))
    Aa[:2 * m, :2 * m] = Ad
    Aa[:2 * m, 2 * m:] = Bd
    Aa[2 * m:, 2 * m:] = np.eye(n_f)

    sol = _solve_mass(rom, np.hstack([rom.Bhat, rom.Dhat, rom.load_operator(S_f)]))
    AinvB, AinvD, AinvF = sol[:, :m], sol[:, m:2 * m], sol[:, 2 * m:]
    nd, nv = S_d.shape[0], S_v.shape[0]
    pad = lambda S, r0: np.vstack([np.zeros((r0, S.shape[1])), S, np.zeros((nz - r0 - S.shape[0], S.shape[1]))])
    Sd, Sv, Sa = pad(S_d, 0), pad(S_v, nd), pad(S_a, nd + nv)
    T = rom.T
    Ga = np.hstack([
        Sd @ T - Sa @ T @ AinvB,
        Sv @ T - Sa @ T @ AinvD,
        Sa @ T @ AinvF,
    ])
    return AugmentedModel(Aa=Aa, Ga=Ga, Q=Q, R=R, n_state=2 * m, dt=dt)


def measurement_update(model: AugmentedModel, fs: FilterState, z: np.ndarray) -> FilterState:
    Ga, P = model.Ga, fs.P
    PGt = P @ Ga.T
    Sinn = Ga @ PGt + model.R
    try:
        factor = scipy.linalg.cho_factor(Sinn)
    except np.linalg.LinAlgError as exc:
        raise FilterError("innovation covariance is not positive definite") from exc
    L = scipy.linalg.cho_solve(factor, PGt.T).T
    x = fs.x + L @ (z - Ga @ fs.x)
    P = P - L @ (Ga @ P)
    return FilterState(x, 0.5 * (P + P.T))


def time_update(model: AugmentedModel, fs: FilterState) -> FilterState:
    P = model.Aa @ fs.P @ model.Aa.T + model.Q
    return FilterState(model.Aa @ fs.x, 0.5 * (P + P.T))


@dataclass(frozen=True)
class FilterResult:
    """Filtered estimates at every measurement sample."""

    forces: np.ndarray
    states: np.ndarray
    final: FilterState
    wall_time: float


def run_filter(model: AugmentedModel, fs0: FilterState, measurements: np.ndarray) -> FilterResult:
    """Alternate measurement and time updates; row k of the output is x(k|k)."""
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    if measurements.shape[1] != model.Ga.shape[0]:
        raise FilterError(
            f"measurement series has {measurements.shape[1]} channels, expected {model.Ga.shape[0]}")
    n = model.n_state
    out = np.empty((measurements.shape[0], model.Aa.shape[0]))
    fs = fs0
    start = time.perf_counter()
    for k, z in enumerate(measurements):
        fs = measurement_update(model, fs, z)
        out[k] = fs.x
        fs = time_update(model, fs)
    wall = time.perf_counter() - start
    return FilterResult(forces=out[:, n:], states=out[:, :n], final=fs, wall_time=wall)
