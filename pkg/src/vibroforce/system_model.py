"""Coupled displacement/pressure (u, p) vibroacoustic systems.

The global DOF vector is ``d = [u; p]``: structural displacements first,
fluid pressures after. The block pencil is

    A = [[Ms, 0], [rho_f c^2 C^T, Mf]]      B = [[Ks, -C], [0, Kf]]

so ``A d'' + B d = S_f f``. Neither A nor B is symmetric when C != 0.

All indices (selection lists, force DOFs) are ZERO-BASED, including in
manifest files. FE tools usually count from one; convert before loading.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.io
import scipy.linalg

__all__ = [
    "AssemblyError",
    "ModelLoadError",
    "CoupledSystem",
    "AssembledSystem",
    "SelectionConfig",
    "ToyModelSpec",
    "assemble_blocks",
    "generate_toy",
    "load_model",
    "save_model",
    "selection_matrix",
]

SYMMETRY_RTOL = 1e-10
MANIFEST_MATRICES = ("Ms", "Ks", "Mf", "Kf", "C")


class AssemblyError(ValueError):
    """Raised when the blocks of a coupled system do not fit together."""


class ModelLoadError(ValueError):
    """Raised when a manifest or one of its matrix files cannot be used."""


def _frozen(a) -> np.ndarray:
    out = np.atleast_2d(np.array(a, dtype=float, copy=True))
    out.setflags(write=False)
    return out


def _check_symmetric(name: str, m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise AssemblyError(f"{name} must be square, got shape {m.shape}")
    scale = np.abs(m).max() if m.size else 0.0
    if scale and np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
        raise AssemblyError(f"{name} is not symmetric to relative tolerance {SYMMETRY_RTOL:g}")


@dataclass(frozen=True)
class CoupledSystem:
    """Physical blocks of an undamped (u, p) model.

    ``C`` has shape (n_s, n_f); ``rho_f`` and ``c`` are the fluid density
    and speed of sound in the same unit system as the matrices.
    """

    Ms: np.ndarray
    Ks: np.ndarray
    Mf: np.ndarray
    Kf: np.ndarray
    C: np.ndarray
    rho_f: float
    c: float

    def __post_init__(self):
        for name in MANIFEST_MATRICES:
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("Ms", "Ks", "Mf", "Kf"):
            _check_symmetric(name, getattr(self, name))
        ns, nf = self.Ms.shape[0], self.Mf.shape[0]
        if self.Ks.shape[0] != ns:
            raise AssemblyError(f"Ks is {self.Ks.shape}, Ms is {self.Ms.shape}")
        if self.Kf.shape[0] != nf:
            raise AssemblyError(f"Kf is {self.Kf.shape}, Mf is {self.Mf.shape}")
        if self.C.shape != (ns, nf):
            raise AssemblyError(
                f"C is {self.C.shape[0]}x{self.C.shape[1]} but structure has n_s={ns} "
                f"and fluid has n_f={nf}; expected {ns}x{nf}"
            )
        if not (self.rho_f > 0 and self.c > 0):
            raise AssemblyError(f"rho_f and c must be positive (rho_f={self.rho_f}, c={self.c})")
        try:
            scipy.linalg.cholesky(self.Ms)
        except np.linalg.LinAlgError as exc:
            raise AssemblyError("Ms is not positive definite") from exc
        object.__setattr__(self, "rho_f", float(self.rho_f))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n_struct(self) -> int:
        return self.Ms.shape[0]

    @property
    def n_fluid(self) -> int:
        return self.Mf.shape[0]

    @property
    def n_dof(self) -> int:
        return self.n_struct + self.n_fluid

    @property
    def coupling_scale(self) -> float:
        """rho_f * c**2, the factor on C^T in the fluid mass row."""
        return self.rho_f * self.c**2


@dataclass(frozen=True)
class AssembledSystem:
    A: np.ndarray
    B: np.ndarray
    n_struct: int
    n_fluid: int

    @property
    def n_dof(self) -> int:
        return self.n_struct + self.n_fluid


def assemble_blocks(system: CoupledSystem) -> AssembledSystem:
    """Build the non-symmetric block mass ``A`` and stiffness ``B``."""
    ns, nf = system.n_struct, system.n_fluid
    if system.C.shape != (ns, nf):
        raise AssemblyError(f"C is {system.C.shape}, expected ({ns}, {nf})")
    A = np.block([
        [system.Ms, np.zeros((ns, nf))],
        [system.coupling_scale * system.C.T, system.Mf],
    ])
    B = np.block([
        [system.Ks, -system.C],
        [np.zeros((nf, ns)), system.Kf],
    ])
    A.setflags(write=False)
    B.setflags(write=False)
    return AssembledSystem(A=A, B=B, n_struct=ns, n_fluid=nf)


def selection_matrix(indices: Sequence[int], n: int) -> np.ndarray:
    """Boolean row-selector: ``S @ x == x[indices]``."""
    S = np.zeros((len(indices), n))
    S[np.arange(len(indices)), list(indices)] = 1.0
    return S


@dataclass(frozen=True)
class SelectionConfig:
    """Measured and forced DOFs, as zero-based global indices.

    Measurement vectors are always ordered displacements, then velocities,
    then accelerations, each block in the order given here.
    """

    disp_idx: tuple[int, ...] = ()
    vel_idx: tuple[int, ...] = ()
    acc_idx: tuple[int, ...] = ()
    force_idx: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("disp_idx", "vel_idx", "acc_idx", "force_idx"):
            idx = tuple(int(i) for i in getattr(self, name))
            if len(set(idx)) != len(idx):
                raise ValueError(f"{name} contains duplicate indices: {idx}")
            if any(i < 0 for i in idx):
                raise ValueError(f"{name} contains negative indices: {idx}")
            object.__setattr__(self, name, idx)

    @property
    def n_meas(self) -> int:
        return len(self.disp_idx) + len(self.vel_idx) + len(self.acc_idx)

    @property
    def n_forces(self) -> int:
        return len(self.force_idx)

    def validate(self, n_dof: int) -> None:
        for name in ("disp_idx", "vel_idx", "acc_idx", "force_idx"):
            bad = [i for i in getattr(self, name) if i >= n_dof]
            if bad:
                raise IndexError(f"{name} entries {bad} out of range for {n_dof} DOFs")

    def matrices(self, n_dof: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(S_d, S_v, S_a, S_f)``; ``S_f`` is n_dof x n_forces."""
        self.validate(n_dof)
        return (
            selection_matrix(self.disp_idx, n_dof),
            selection_matrix(self.vel_idx, n_dof),
            selection_matrix(self.acc_idx, n_dof),
            selection_matrix(self.force_idx, n_dof).T,
        )


# --------------------------------------------------------------------------
# 1-D toy generators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ToyModelSpec:
    """Desk-scale rod + acoustic column joined through a piston face.

    Geometry along x: a rigid wall at x=0, the fluid column on
    ``[0, len_fluid]``, then the rod on ``[len_fluid, len_fluid + len_struct]``.
    Structural node 0 sits on the interface; fluid node ``n_fluid_elems`` is
    the interface pressure node. The pressure pushes the rod towards +x,
    giving a coupling entry ``C[0, -1] = +area`` before boundary elimination.

    ``struct_fixed`` clamps the rod at (interface end, far end).
    ``fluid_open`` imposes p = 0 at (wall end, interface end); a closed end
    is the natural rigid-wall condition.

    Fluid blocks use the per-unit-density convention: ``Mf = area * int N N``
    and ``Kf = c^2 * area * int N' N'``, which with ``rho_f c^2 C^T`` in the
    mass row is the pressure wave equation multiplied by c^2.

    Defaults are steel and water in mm / tonne / s (N, MPa): the
    non-symmetric pencil is far better conditioned in these units than in
    SI, where double-precision eigensolves lose most digits.

    ``spring_mass_chain`` uses the same stiffness with lumped equal masses
    at every node (the textbook chain), for hand-checkable frequencies.
    """

    kind: str = "rod_tube_piston"
    n_struct_elems: int = 60
    n_fluid_elems: int = 60
    E: float = 210000.0
    rho_s: float = 8.0e-9
    area: float = 1000.0
    len_struct: float = 1000.0
    len_fluid: float = 1000.0
    rho_f: float = 1.01e-9
    c: float = 1.48e6
    struct_fixed: tuple[bool, bool] = (False, True)
    fluid_open: tuple[bool, bool] = (True, False)

    def __post_init__(self):
        if self.kind not in ("rod_tube_piston", "spring_mass_chain"):
            raise ValueError(f"unknown toy kind {self.kind!r}")
        if self.n_struct_elems < 2 or self.n_fluid_elems < 2:
            raise ValueError("element counts must be >= 2")
        for name in ("E", "rho_s", "area", "len_struct", "len_fluid", "rho_f", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        object.__setattr__(self, "struct_fixed", tuple(bool(b) for b in self.struct_fixed))
        object.__setattr__(self, "fluid_open", tuple(bool(b) for b in self.fluid_open))


def _bar_matrices(n_elems: int, length: float, stiff: float, mass: float, lumped: bool):
    """Assemble a uniform 2-node bar; ``stiff``/``mass`` are per unit length."""
    le = length / n_elems
    ke = stiff / le * np.array([[1.0, -1.0], [-1.0, 1.0]])
    me = mass * le / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    n = n_elems + 1
    K = np.zeros((n, n))
    M = np.zeros((n, n))
    for e in range(n_elems):
        sl = slice(e, e + 2)
        K[sl, sl] += ke
        M[sl, sl] += me
    if lumped:
        M = mass * le * np.eye(n)
    return K, M


def generate_toy(spec: ToyModelSpec) -> CoupledSystem:
    """Build the coupled blocks for a :class:`ToyModelSpec`."""
    lumped = spec.kind == "spring_mass_chain"
    Ks, Ms = _bar_matrices(spec.n_struct_elems, spec.len_struct,
                           spec.E * spec.area, spec.rho_s * spec.area, lumped)
    Kf, Mf = _bar_matrices(spec.n_fluid_elems, spec.len_fluid,
                           spec.c**2 * spec.area, spec.area, lumped)
    ns, nf = Ks.shape[0], Kf.shape[0]
    C = np.zeros((ns, nf))
    C[0, nf - 1] = spec.area

    keep_s = [i for i in range(ns)
              if not ((i == 0 and spec.struct_fixed[0]) or (i == ns - 1 and spec.struct_fixed[1]))]
    keep_f = [j for j in range(nf)
              if not ((j == 0 and spec.fluid_open[0]) or (j == nf - 1 and spec.fluid_open[1]))]
    ix_s = np.ix_(keep_s, keep_s)
    ix_f = np.ix_(keep_f, keep_f)
    return CoupledSystem(
        Ms=Ms[ix_s], Ks=Ks[ix_s], Mf=Mf[ix_f], Kf=Kf[ix_f],
        C=C[np.ix_(keep_s, keep_f)], rho_f=spec.rho_f, c=spec.c,
    )


# --------------------------------------------------------------------------
# Manifest I/O
# --------------------------------------------------------------------------

def _parse_manifest(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ModelLoadError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    return entries


def _parse_indices(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(" ", "").split(",") if tok)


def _read_matrix(path: Path) -> np.ndarray:
    if not path.is_file():
        raise ModelLoadError(f"{path}: file not found")
    try:
        info = scipy.io.mminfo(str(path))
        mat = scipy.io.mmread(str(path))
    except Exception as exc:  # scipy raises a zoo of types on bad headers
        raise ModelLoadError(f"{path}: not a valid Matrix Market file ({exc})") from exc
    if info[4] not in ("real", "integer"):
        raise ModelLoadError(f"{path}: field {info[4]!r} unsupported, need real")
    if hasattr(mat, "toarray"):
        mat = mat.toarray()
    return np.asarray(mat, dtype=float)


def load_model(manifest_path) -> tuple[CoupledSystem, SelectionConfig]:
    """Read a manifest and the Matrix Market blocks it points to.

    Matrix paths are resolved relative to the manifest's directory. Symmetric
    storage is expanded on read.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ModelLoadError(f"{manifest_path}: manifest not found")
    entries = _parse_manifest(manifest_path)
    missing = [k for k in (*MANIFEST_MATRICES, "rho_f", "c") if k not in entries]
    if missing:
        raise ModelLoadError(f"{manifest_path}: missing keys {', '.join(missing)}")

    mats = {k: _read_matrix(manifest_path.parent / entries[k]) for k in MANIFEST_MATRICES}
    try:
        system = CoupledSystem(**mats, rho_f=float(entries["rho_f"]), c=float(entries["c"]))
        selection = SelectionConfig(**{
            key: _parse_indices(entries.get(key, ""))
            for key in ("disp_idx", "vel_idx", "acc_idx", "force_idx")
        })
        selection.validate(system.n_dof)
    except (AssemblyError, ValueError, IndexError) as exc:
        raise ModelLoadError(f"{manifest_path}: {exc}") from exc
    return system, selection


def save_model(system: CoupledSystem, selection: SelectionConfig, directory) -> Path:
    """Write blocks as Matrix Market files plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["# zero-based DOF indices"]
    for name in MANIFEST_MATRICES:
        fname = f"{name}.mtx"
        sym = "general" if name == "C" else "symmetric"
        mat = np.asarray(getattr(system, name))
        if sym == "symmetric" and not np.array_equal(mat, mat.T):
            sym = "general"
        scipy.io.mmwrite(str(directory / fname), mat, symmetry=sym)
        lines.append(f"{name} = {fname}")
    lines.append(f"rho_f = {system.rho_f!r}")
    lines.append(f"c = {system.c!r}")
    for key in ("disp_idx", "vel_idx", "acc_idx", "force_idx"):
        lines.append(f"{key} = {','.join(str(i) for i in getattr(selection, key))}")
    path = directory / "model.manifest"
    path.write_text("\n".join(lines) + "\n")
    return path
