"""Strongly coupled vibroacoustic reduced-order model.

The basis couples truncated structural modes with fluid modes of a
coupling-corrected fluid mass; the structural part of each fluid basis
vector carries the static deflection ``Psi = Ks^-1 C`` it induces:

    T = [[Phi_d, Psi Xi_d],
         [0,     Xi_d    ]]

Reduced operators are ``Ahat = T^T A T`` and ``Bhat = T^T B T``; Rayleigh
damping is attached directly in modal coordinates.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg

from .system_model import AssembledSystem, CoupledSystem, assemble_blocks

__all__ = [
    "ReductionError",
    "RomSpec",
    "DampingSpec",
    "ReducedModel",
    "static_coupling_map",
    "generalized_symmetric_modes",
    "structural_modes",
    "partially_reduced_fluid_mass",
    "fluid_modes",
    "build_reduced",
    "reduce_system",
    "identity_reduction",
    "pencil_eigenvalues",
    "eigenvalue_error",
    "export_reduced",
]

_SINGULAR_PIVOT_RATIO = 1e-13


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class RomSpec:
    n_modes_struct: int
    n_modes_fluid: int
    mass_normalize: bool = True

    def validate(self, system: CoupledSystem) -> None:
        if not 1 <= self.n_modes_struct <= system.n_struct:
            raise ReductionError(
                f"n_modes_struct={self.n_modes_struct} outside [1, {system.n_struct}]")
        if not 1 <= self.n_modes_fluid <= system.n_fluid:
            raise ReductionError(
                f"n_modes_fluid={self.n_modes_fluid} outside [1, {system.n_fluid}]")


@dataclass(frozen=True)
class DampingSpec:
    """Rayleigh coefficients: ``a1*`` multiply mass, ``a2*`` stiffness."""

    a1s: float = 0.0
    a2s: float = 0.0
    a1f: float = 0.0
    a2f: float = 0.0

    def __post_init__(self):
        if min(self.a1s, self.a2s, self.a1f, self.a2f) < 0:
            raise ValueError("Rayleigh coefficients must be non-negative")


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Projection basis and reduced second-order operators.

    ``Dhat`` is block diagonal over (structure, fluid) generalized
    coordinates. ``n_struct`` is the physical structural DOF count so that
    physical vectors can be split back into (u, p).
    """

    T: np.ndarray
    Ahat: np.ndarray
    Bhat: np.ndarray
    Dhat: np.ndarray
    lambda_struct: np.ndarray
    gamma_fluid: np.ndarray
    psi: np.ndarray
    n_struct: int

    @property
    def n_dof(self) -> int:
        return self.T.shape[0]

    @property
    def size(self) -> int:
        return self.T.shape[1]

    @property
    def n_modes_struct(self) -> int:
        return len(self.lambda_struct)

    @property
    def n_modes_fluid(self) -> int:
        return len(self.gamma_fluid)

    def load_operator(self, S_f: np.ndarray) -> np.ndarray:
        """``T^T S_f``: maps applied forces to generalized loads."""
        return self.T.T @ S_f

    def reduce_vector(self, x: np.ndarray) -> np.ndarray:
        """Least-squares generalized coordinates of a physical vector (exact if T is square)."""
        return np.linalg.lstsq(self.T, x, rcond=None)[0]


def _cholesky_checked(M: np.ndarray) -> np.ndarray:
    L = scipy.linalg.cholesky(M, lower=True)
    diag = np.diag(L) ** 2
    if diag.min() <= _SINGULAR_PIVOT_RATIO * diag.max():
        raise np.linalg.LinAlgError("matrix is numerically singular")
    return L


def static_coupling_map(system: CoupledSystem) -> np.ndarray:
    """``Psi = Ks^-1 C``: structural deflection per unit interface pressure."""
    try:
        factor = scipy.linalg.cho_factor(system.Ks)
        d = np.diag(factor[0]) ** 2
        if d.min() <= _SINGULAR_PIVOT_RATIO * d.max():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError as exc:
        raise ReductionError(
            "Ks is singular or indefinite; the structure probably has a rigid-body "
            "mode. Constrain it (e.g. clamp one end) before reducing."
        ) from exc
    return scipy.linalg.cho_solve(factor, system.C)


def _sign_fix(vecs: np.ndarray) -> np.ndarray:
    # first clearly nonzero entry of each column made positive
    tol = 1e-12 * np.abs(vecs).max(axis=0, initial=0.0)
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > tol[j])
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] *= -1.0
    return vecs


def generalized_symmetric_modes(K: np.ndarray, M: np.ndarray, n: int,
                                mass_normalize: bool = True,
                                what: str = "mass matrix"):
    """Lowest ``n`` eigenpairs of ``K x = lam M x`` for symmetric K, SPD M.

    The mass matrix is Cholesky-factored, ``M = L L^T``, and the problem is
    solved as the standard symmetric one ``L^-1 K L^-T y = lam y``.
    Eigenvalues are returned ascending; roundoff-level negatives are
    clipped to zero.
    """
    M = 0.5 * (M + M.T)
    K = 0.5 * (K + K.T)
    try:
        L = _cholesky_checked(M)
    except np.linalg.LinAlgError as exc:
        smallest = np.linalg.eigvalsh(M)[0]
        raise ReductionError(
            f"{what} is not positive definite (smallest eigenvalue {smallest:.6g})") from exc
    Linv_K = scipy.linalg.solve_triangular(L, K, lower=True)
    Kt = scipy.linalg.solve_triangular(L, Linv_K.T, lower=True)
    Kt = 0.5 * (Kt + Kt.T)
    lam, Y = scipy.linalg.eigh(Kt, subset_by_index=[0, n - 1])
    vecs = scipy.linalg.solve_triangular(L.T, Y, lower=False)
    if not mass_normalize:
        vecs = vecs / np.linalg.norm(vecs, axis=0)
    scale = max(abs(lam[-1]), 1.0)
    lam = np.where((lam < 0) & (lam > -1e-10 * scale), 0.0, lam)
    return _sign_fix(vecs), lam


def structural_modes(system: CoupledSystem, n: int, mass_normalize: bool = True):
    """``(Phi_d, Lambda_d)`` for ``Ks phi = lam Ms phi``."""
    return generalized_symmetric_modes(system.Ks, system.Ms, n, mass_normalize, "Ms")


def partially_reduced_fluid_mass(system: CoupledSystem, psi: np.ndarray) -> np.ndarray:
    """``Mf + (rho_f c^2 C^T + Psi^T Ms) Psi``.

    Symmetric in exact arithmetic; not symmetrized here.
    """
    return system.Mf + (system.coupling_scale * system.C.T + psi.T @ system.Ms) @ psi


def fluid_modes(Kf: np.ndarray, Mf_tilde: np.ndarray, n: int, mass_normalize: bool = True):
    """``(Xi_d, Gamma_d)`` for ``Kf xi = gamma Mf_tilde xi``."""
    return generalized_symmetric_modes(Kf, Mf_tilde, n, mass_normalize, "partially reduced fluid mass")


def build_reduced(system: CoupledSystem, struct_modes, psi: np.ndarray, fluid_modes_,
                  damping: DampingSpec | None = None) -> ReducedModel:
    """Assemble ``T``, project the pencil and attach modal Rayleigh damping.

    ``struct_modes`` and ``fluid_modes_`` are ``(vectors, eigenvalues)``
    pairs as returned by :func:`structural_modes` and :func:`fluid_modes`.
    """
    damping = damping or DampingSpec()
    phi, lam = struct_modes
    xi, gam = fluid_modes_
    ns, nf = system.n_struct, system.n_fluid
    ks, kf = phi.shape[1], xi.shape[1]
    T = np.block([
        [phi, psi @ xi],
        [np.zeros((nf, ks)), xi],
    ])
    full = assemble_blocks(system)
    Ahat = T.T @ full.A @ T
    Bhat = T.T @ full.B @ T
    Dhat = np.zeros((ks + kf, ks + kf))
    Dhat[:ks, :ks] = np.diag(damping.a1s + damping.a2s * lam)
    Dhat[ks:, ks:] = np.diag(damping.a1f + damping.a2f * gam)
    for arr in (T, Ahat, Bhat, Dhat):
        arr.setflags(write=False)
    return ReducedModel(T=T, Ahat=Ahat, Bhat=Bhat, Dhat=Dhat,
                        lambda_struct=np.asarray(lam), gamma_fluid=np.asarray(gam),
                        psi=psi, n_struct=ns)


def reduce_system(system: CoupledSystem, spec: RomSpec,
                  damping: DampingSpec | None = None) -> ReducedModel:
    spec.validate(system)
    psi = static_coupling_map(system)
    smodes = structural_modes(system, spec.n_modes_struct, spec.mass_normalize)
    mft = partially_reduced_fluid_mass(system, psi)
    fmodes = fluid_modes(system.Kf, mft, spec.n_modes_fluid, spec.mass_normalize)
    return build_reduced(system, smodes, psi, fmodes, damping)


def identity_reduction(system: CoupledSystem) -> ReducedModel:
    """Undamped 'reduction' with ``T = I`` (physical coordinates kept)."""
    full = assemble_blocks(system)
    n = full.n_dof
    return ReducedModel(T=np.eye(n), Ahat=full.A.copy(), Bhat=full.B.copy(),
                        Dhat=np.zeros((n, n)), lambda_struct=np.zeros(system.n_struct),
                        gamma_fluid=np.zeros(system.n_fluid),
                        psi=np.zeros((system.n_struct, system.n_fluid)),
                        n_struct=system.n_struct)


def _equilibrate(A: np.ndarray, B: np.ndarray, sweeps: int = 50):
    # alternating row/column max-norm scaling of |A|/|A|max + |B|/|B|max;
    # the (u, p) pencil is badly scaled and QZ loses digits without it
    W = np.abs(A) / np.abs(A).max() + np.abs(B) / np.abs(B).max()
    r = np.ones(W.shape[0])
    c = np.ones(W.shape[1])
    for _ in range(sweeps):
        r /= np.sqrt((r[:, None] * W * c[None, :]).max(axis=1))
        c /= np.sqrt((r[:, None] * W * c[None, :]).max(axis=0))
    return r[:, None] * A * c[None, :], r[:, None] * B * c[None, :]


def pencil_eigenvalues(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Sorted real parts of the eigenvalues of ``B x = lam A x``.

    Diagonally equilibrated QZ; validation use only.
    """
    A, B = _equilibrate(np.asarray(A, float), np.asarray(B, float))
    lam = scipy.linalg.eigvals(B, A)
    lam = lam[np.isfinite(lam)]
    return np.sort(lam.real)


def _nonzero(lam: np.ndarray) -> np.ndarray:
    if lam.size == 0:
        return lam
    return lam[np.abs(lam) > 1e-9 * np.abs(lam).max()]


def eigenvalue_error(full: AssembledSystem, red: ReducedModel, k: int) -> np.ndarray:
    """Relative errors of the ``k`` lowest nonzero coupled eigenvalues."""
    lam_full = _nonzero(pencil_eigenvalues(full.A, full.B))
    lam_red = _nonzero(pencil_eigenvalues(red.Ahat, red.Bhat))
    avail = min(lam_full.size, lam_red.size)
    if k > avail:
        raise ReductionError(f"requested {k} eigenvalues but only {avail} nonzero are available")
    return np.abs(lam_red[:k] - lam_full[:k]) / np.abs(lam_full[:k])


def export_reduced(red: ReducedModel, directory) -> list[Path]:
    """Write T, Ahat, Bhat, Dhat as Matrix Market and the retained eigenvalues as CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in ("T", "Ahat", "Bhat", "Dhat"):
        path = directory / f"{name}.mtx"
        scipy.io.mmwrite(str(path), np.asarray(getattr(red, name)))
        paths.append(path)
    path = directory / "retained_eigenvalues.csv"
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["field", "index", "eigenvalue"])
        for i, v in enumerate(red.lambda_struct):
            writer.writerow(["structure", i, repr(float(v))])
        for i, v in enumerate(red.gamma_fluid):
            writer.writerow(["fluid", i, repr(float(v))])
    paths.append(path)
    return paths
