"""Implicit Tikhonov-regularized force identification on a reduced model.

Each step inverts one Newmark step of the reduced equations. Writing the
next reduced state as an affine function of the unknown force,

    [d; v; a](t+dt) = G f + g,

with ``G`` constant and ``g`` the free (zero-force) response, the force
minimizing ``|z_m - S (G f + g)|^2 + alpha |f|^2`` is

    f = (G^T S^T S G + alpha I)^-1 G^T S^T (z_m - S g) = P (z_m - S g).

``G``, ``S`` and ``P`` depend only on the model, sensors, dt and alpha,
so they are built once; a step costs a few mat-vecs and one LU solve.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .newmark import NewmarkParams, State, Trajectory, effective_stiffness
from .rom import ReducedModel
from .system_model import SelectionConfig

__all__ = [
    "IdentificationError",
    "IdentifierConfig",
    "Gain",
    "IdentificationResult",
    "LCurveResult",
    "precompute_gain",
    "free_response",
    "step_identify",
    "recover_physical",
    "run_identification",
    "l_curve_select_alpha",
    "gain_factory_for",
]

log = logging.getLogger(__name__)


class IdentificationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IdentifierConfig:
    newmark: NewmarkParams
    alpha: float
    selection: SelectionConfig
    rom: ReducedModel

    def __post_init__(self):
        if not self.alpha >= 0:
            raise IdentificationError(f"alpha must be >= 0, got {self.alpha}")
        self.selection.validate(self.rom.n_dof)
        if self.selection.n_forces == 0:
            raise IdentificationError("no force DOFs selected")
        if self.selection.n_meas < self.selection.n_forces and self.alpha == 0:
            raise IdentificationError(
                f"{self.selection.n_meas} measurements for {self.selection.n_forces} forces: "
                "add sensors or use alpha > 0"
            )


@dataclass(frozen=True, eq=False)
class Gain:
    """Step-invariant operators.

    ``lu`` factors the effective stiffness ``K`` (so ``H = K^-1``),
    ``G`` is (3m x n_forces), ``S`` the reduced selection (n_z x 3m),
    ``SG = S @ G`` and ``P`` the regularized pseudo-inverse (n_forces x n_z).
    """

    lu: tuple
    G: np.ndarray
    S: np.ndarray
    SG: np.ndarray
    P: np.ndarray
    alpha: float
    params: NewmarkParams
    A: np.ndarray
    D: np.ndarray

    @property
    def size(self) -> int:
        return self.A.shape[0]


def precompute_gain(cfg: IdentifierConfig) -> Gain:
    rom, p = cfg.rom, cfg.newmark
    m = rom.size
    _, lu = effective_stiffness(rom.Ahat, rom.Dhat, rom.Bhat, p)
    S_d, S_v, S_a, S_f = cfg.selection.matrices(rom.n_dof)
    HTf = scipy.linalg.lu_solve(lu, rom.load_operator(S_f))
    c0, c1 = p.coefficients[:2]
    G = np.vstack([HTf, c1 * HTf, c0 * HTf])
    S = np.zeros((cfg.selection.n_meas, 3 * m))
    r = 0
    for k, Sx in enumerate((S_d, S_v, S_a)):
        S[r:r + Sx.shape[0], k * m:(k + 1) * m] = Sx @ rom.T
        r += Sx.shape[0]
    SG = S @ G
    N = SG.T @ SG + cfg.alpha * np.eye(SG.shape[1])
    rank = np.linalg.matrix_rank(SG)
    try:
        if cfg.alpha == 0 and rank < SG.shape[1]:
            raise np.linalg.LinAlgError
        factor = scipy.linalg.cho_factor(N)
    except np.linalg.LinAlgError as exc:
        raise IdentificationError(
            f"normal matrix is singular (rank of S G is {rank} for {SG.shape[1]} forces); "
            "use alpha > 0 or add sensors"
        ) from exc
    P = scipy.linalg.cho_solve(factor, SG.T)
    for arr in (G, S, SG, P):
        arr.setflags(write=False)
    return Gain(lu=lu, G=G, S=S, SG=SG, P=P, alpha=cfg.alpha, params=p,
                A=np.asarray(rom.Ahat), D=np.asarray(rom.Dhat))


def free_response(gain: Gain, s: State) -> np.ndarray:
    """Stacked zero-force prediction ``g`` (length 3m) from the state at ``t``."""
    c0, c1, c2, c3, c4, c5 = gain.params.coefficients
    r = gain.A @ (c0 * s.d + c2 * s.v + c3 * s.a) + gain.D @ (c1 * s.d + c4 * s.v + c5 * s.a)
    h = scipy.linalg.lu_solve(gain.lu, r, check_finite=False)
    dh = h - s.d
    return np.concatenate([h, c1 * dh - c4 * s.v - c5 * s.a, c0 * dh - c2 * s.v - c3 * s.a])


def step_identify(gain: Gain, s: State, z_m: np.ndarray):
    """Identify the force at ``t + dt`` and return ``(f, next reduced state)``.

    ``z_m`` is ordered displacements, velocities, accelerations, as in the
    :class:`SelectionConfig` the gain was built from.
    """
    z_m = np.asarray(z_m, dtype=float)
    if z_m.shape != (gain.S.shape[0],):
        raise IdentificationError(f"measurement has shape {z_m.shape}, expected ({gain.S.shape[0]},)")
    if not np.all(np.isfinite(z_m)):
        raise IdentificationError("non-finite measurement")
    g = free_response(gain, s)
    f = gain.P @ (z_m - gain.S @ g)
    x = gain.G @ f + g
    m = gain.size
    return f, State(x[:m], x[m:2 * m], x[2 * m:])


def recover_physical(rom: ReducedModel, s: State) -> State:
    return State(rom.T @ s.d, rom.T @ s.v, rom.T @ s.a)


@dataclass(frozen=True)
class IdentificationResult:
    """Outputs for samples 1..N (the initial state at sample 0 is an input).

    ``reduced`` holds generalized coordinates, ``physical`` the requested
    physical DOFs (columns in ``dofs`` order). ``wall_time`` covers the
    identification loop and the physical recovery.
    """

    t: np.ndarray
    forces: np.ndarray
    reduced: Trajectory
    physical: Trajectory
    dofs: tuple[int, ...]
    wall_time: float
    alpha: float


def run_identification(gain: Gain, rom: ReducedModel, measurements: np.ndarray,
                       s0: State | None = None, dofs: Sequence[int] | None = None,
                       t0: float = 0.0) -> IdentificationResult:
    """Run the identifier over a measurement series.

    ``measurements`` is (N+1, n_z) sampled at ``dt`` from ``t0``; row 0 is
    the sample of the initial state and is not inverted. The identifier
    starts at rest unless ``s0`` (reduced) is given.
    """
    measurements = np.atleast_2d(np.asarray(measurements, dtype=float))
    if measurements.shape[1] != gain.S.shape[0]:
        raise IdentificationError(
            f"measurement series has {measurements.shape[1]} channels, expected {gain.S.shape[0]}")
    m = gain.size
    n_steps = measurements.shape[0] - 1
    s = s0 if s0 is not None else State.zeros(m)
    dofs = tuple(range(rom.n_dof)) if dofs is None else tuple(int(i) for i in dofs)
    forces = np.empty((n_steps, gain.P.shape[0]))
    xs = np.empty((n_steps, 3 * m))

    start = time.perf_counter()
    for k in range(n_steps):
        f, s = step_identify(gain, s, measurements[k + 1])
        forces[k] = f
        xs[k, :m], xs[k, m:2 * m], xs[k, 2 * m:] = s
    Tsel = rom.T[list(dofs)]
    reduced = Trajectory(t0 + gain.params.dt * np.arange(1, n_steps + 1),
                         xs[:, :m], xs[:, m:2 * m], xs[:, 2 * m:])
    physical = reduced.mapped(Tsel)
    wall = time.perf_counter() - start
    return IdentificationResult(reduced.t, forces, reduced, physical, dofs, wall, gain.alpha)


# --------------------------------------------------------------------------
# regularization parameter
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LCurveResult:
    alpha: float
    alphas: np.ndarray
    residual_norms: np.ndarray
    solution_norms: np.ndarray
    curvature: np.ndarray
    degenerate: bool


def _menger_curvature(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Signed 3-point curvature; positive where the curve turns left."""
    k = np.zeros(len(x))
    for i in range(1, len(x) - 1):
        p1 = np.array([x[i - 1], y[i - 1]])
        p2 = np.array([x[i], y[i]])
        p3 = np.array([x[i + 1], y[i + 1]])
        a, b, c = p2 - p1, p3 - p2, p3 - p1
        denom = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
        if denom > 0:
            k[i] = 2.0 * (a[0] * b[1] - a[1] * b[0]) / denom
    return k


def _pick_last(values: np.ndarray, best: float) -> int:
    # ties go to the larger alpha (later grid entry)
    return int(np.flatnonzero(values == best)[-1])


def _cluster_representatives(x: np.ndarray, y: np.ndarray, tol: float) -> np.ndarray:
    """Collapse runs of nearly coincident points; keep the last (largest alpha) of each run.

    Distances are measured after scaling each axis by its range, so the
    tolerance is a fraction of the curve's extent.
    """
    span = np.array([np.ptp(x), np.ptp(y)])
    span[span == 0] = 1.0
    p = np.column_stack([x, y]) / span
    reps, start = [], 0
    for i in range(1, len(p) + 1):
        if i == len(p) or np.linalg.norm(p[i] - p[start]) >= tol:
            reps.append(i - 1)
            start = i
    return np.array(reps, dtype=int)


def l_curve_select_alpha(gain_factory: Callable[[float], Gain], rom: ReducedModel,
                         window: np.ndarray, alpha_grid: Sequence[float],
                         merge_tol: float = 1e-2) -> LCurveResult:
    """Pick alpha at the corner of the (log residual, log force norm) curve.

    ``gain_factory(alpha)`` builds the gain for one grid point; each point
    runs the identifier over the calibration ``window``. Points are taken
    in ascending alpha, both axes are scaled to the curve's range, and runs
    of points closer than ``merge_tol`` collapse to their largest-alpha
    member (an under-regularized plateau otherwise produces spurious
    curvature between near-identical points). The corner is the maximum of
    the signed 3-point curvature over what remains, among points reached
    from a larger force norm (the vertical branch of the L). With fewer
    than three distinct points, or no such point bending towards the
    origin, the curve is degenerate and the alpha with the smallest
    residual is returned with ``degenerate=True``. Noise-free data land
    here: the identified force is then insensitive to small alpha.
    """
    alphas = np.sort(np.asarray(alpha_grid, dtype=float))
    if alphas.size == 0 or np.any(alphas < 0):
        raise IdentificationError("alpha grid must be non-empty and non-negative")
    res = np.empty(alphas.size)
    sol = np.empty(alphas.size)
    for i, alpha in enumerate(alphas):
        gain = gain_factory(float(alpha))
        out = run_identification(gain, rom, window, dofs=())
        xs = np.hstack([out.reduced.d, out.reduced.v, out.reduced.a])
        res[i] = np.linalg.norm(window[1:] - xs @ gain.S.T)
        sol[i] = np.linalg.norm(out.forces)

    tiny = np.finfo(float).tiny
    x, y = np.log(res + tiny), np.log(sol + tiny)
    curv = np.zeros(alphas.size)
    reps = _cluster_representatives(x, y, merge_tol)
    if reps.size >= 3:
        span = np.array([np.ptp(x), np.ptp(y)])
        span[span == 0] = 1.0
        curv[reps] = _menger_curvature(x[reps] / span[0], y[reps] / span[1])
    inner = np.empty(0)
    if reps.size >= 3:
        inner = curv[reps[1:-1]].copy()
        # a corner needs a vertical branch: the force norm must grow towards smaller alpha
        inner[y[reps[:-2]] <= y[reps[1:-1]]] = 0.0
    degenerate = inner.size == 0 or inner.max() <= 0
    if degenerate:
        idx = _pick_last(res, res.min())
        if alphas.size > 1:
            log.warning("L-curve has no usable corner; taking the minimum-residual alpha %.3g", alphas[idx])
    else:
        idx = int(reps[1:-1][_pick_last(inner, inner.max())])
    return LCurveResult(float(alphas[idx]), alphas, res, sol, curv, degenerate)


def gain_factory_for(cfg: IdentifierConfig) -> Callable[[float], Gain]:
    """Gains for the same model and sensors at varying alpha."""
    return lambda alpha: precompute_gain(replace(cfg, alpha=alpha))
