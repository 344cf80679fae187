"""Experiment configuration loaded from YAML.

Schema (all sections optional except ``forces``; indices are zero-based
global DOF numbers, structural DOFs first, then fluid DOFs)::

    model:
      toy: {kind: rod_tube_piston, n_struct_elems: 90, n_fluid_elems: 90, E: 210000.0, ...}
      # or
      manifest: path/to/model.manifest     # relative to the config file
    rom: {n_modes_struct: 30, n_modes_fluid: 30, mass_normalize: true}
    damping: {a1s: 10.0, a2s: 1.0e-6, a1f: 10.0, a2f: 1.0e-6}
    newmark: {dt: 1.0e-3, beta: 0.25, delta: 0.5}
    forces:
      - name: f1
        dof: 10
        sines:                       # sum of amplitude * sin(2 pi frequency_hz t + phase)
          - {amplitude: 200.0, frequency_hz: 15.0}
      - name: f2
        dof: 30
        random: {band_hz: 8.0, n_terms: 8, amplitude: 300.0, seed: 3}
    sensors: {disp_idx: [], vel_idx: [], acc_idx: [11, 31, 51, 71, 21, 61]}
    noise: {tau: 0.01, seed: 0}
    method: proposed                 # proposed | akf | both
    alpha: 0.0                       # or {l_curve: {min: 1.0e-12, max: 1.0e-2, n: 11, relative: true, window: 1.0}}
    akf: {q_force_rate: 3.0e6, q_state: 1.0e-20, p0_state: 1.0e-12, p0_force: 1.0e4, tau_floor: 1.0e-6}
    duration: 10.0
    repeats: 20
    noise_taus: [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
    comparison: {window: 0.1, proposed_dt: 1.0e-3, akf_dts: [1.0e-3, 1.0e-4, 1.0e-5]}
    recover_dofs: [10, 30, 50, 70]   # displacement channels reported (default: force DOFs)
    validate_k: 10
    out_dir: out
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .metrics import NoiseSpec, make_rng
from .newmark import NewmarkParams
from .rom import DampingSpec, RomSpec
from .system_model import SelectionConfig, ToyModelSpec

__all__ = [
    "ConfigError",
    "SineTerm",
    "ForceSpec",
    "LCurveSpec",
    "AkfSpec",
    "ComparisonSpec",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
]

METHODS = ("proposed", "akf", "both")
RANDOM_BANDS_HZ = (1.0, 2.0, 4.0, 8.0, 16.0)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SineTerm:
    amplitude: float
    frequency_hz: float
    phase: float = 0.0


@dataclass(frozen=True)
class ForceSpec:
    """One applied force: a DOF and a sum of sinusoids.

    A random composition is expanded to explicit terms at load time, so the
    same config always yields the same profile.
    """

    name: str
    dof: int
    terms: tuple[SineTerm, ...]

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for term in self.terms:
            out += term.amplitude * np.sin(2.0 * math.pi * term.frequency_hz * t + term.phase)
        return out

    @property
    def is_zero(self) -> bool:
        return all(term.amplitude == 0 for term in self.terms)


def random_terms(band_hz: float, n_terms: int, amplitude: float, seed: int) -> tuple[SineTerm, ...]:
    """Seeded composition: uniform amplitude in [0, amplitude), frequency in (0, band_hz], phase in [0, 2 pi)."""
    if band_hz not in RANDOM_BANDS_HZ:
        raise ConfigError(f"band_hz must be one of {RANDOM_BANDS_HZ}, got {band_hz}")
    if n_terms < 1 or amplitude < 0:
        raise ConfigError("random composition needs n_terms >= 1 and amplitude >= 0")
    rng = make_rng(seed)
    amps = rng.uniform(0.0, amplitude, n_terms)
    freqs = band_hz * (1.0 - rng.uniform(0.0, 1.0, n_terms))
    phases = rng.uniform(0.0, 2.0 * math.pi, n_terms)
    return tuple(SineTerm(float(a), float(f), float(p)) for a, f, p in zip(amps, freqs, phases))


@dataclass(frozen=True)
class LCurveSpec:
    """Log-spaced alpha grid; with ``relative`` the grid multiplies ``||S G||_2^2``."""

    min: float = 1e-12
    max: float = 1e-2
    n: int = 11
    relative: bool = True
    window: float = 1.0

    def __post_init__(self):
        if not (0 < self.min < self.max) or self.n < 10:
            raise ConfigError("l_curve grid must be positive, increasing, with at least 10 points")
        if not self.window > 0:
            raise ConfigError("l_curve window must be positive")

    def grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.min), math.log10(self.max), self.n)


@dataclass(frozen=True)
class AkfSpec:
    """Filter tuning. The force block of Q is ``q_force_rate * dt`` (random-walk intensity)."""

    q_force_rate: float = 3.0e6
    q_state: float = 1.0e-20
    p0_state: float = 1.0e-12
    p0_force: float = 1.0e4
    tau_floor: float = 1.0e-6

    def __post_init__(self):
        if min(self.q_force_rate, self.q_state, self.p0_state, self.p0_force) < 0 or not self.tau_floor > 0:
            raise ConfigError("AKF covariances must be >= 0 and tau_floor > 0")


@dataclass(frozen=True)
class ComparisonSpec:
    window: float = 0.1
    proposed_dt: float = 1e-3
    akf_dts: tuple[float, ...] = (1e-3, 1e-4, 1e-5)

    def __post_init__(self):
        if not self.window > 0 or not self.proposed_dt > 0 or not self.akf_dts:
            raise ConfigError("comparison needs a positive window, proposed_dt and at least one AKF dt")
        if any(d > self.proposed_dt for d in self.akf_dts):
            raise ConfigError("AKF time increments must not exceed the proposed method's")


@dataclass(frozen=True)
class ExperimentConfig:
    forces: tuple[ForceSpec, ...]
    model: ToyModelSpec | Path = field(default_factory=ToyModelSpec)
    rom: RomSpec = field(default_factory=lambda: RomSpec(10, 10))
    damping: DampingSpec = field(default_factory=DampingSpec)
    newmark: NewmarkParams = field(default_factory=lambda: NewmarkParams(1e-3))
    sensors: SelectionConfig = field(default_factory=SelectionConfig)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    method: str = "proposed"
    alpha: float | LCurveSpec = 0.0
    akf: AkfSpec = field(default_factory=AkfSpec)
    duration: float = 10.0
    repeats: int = 1
    noise_taus: tuple[float, ...] = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05)
    comparison: ComparisonSpec = field(default_factory=ComparisonSpec)
    recover_dofs: tuple[int, ...] | None = None
    validate_k: int = 10
    out_dir: Path = Path("out")

    def __post_init__(self):
        if not self.forces:
            raise ConfigError("at least one force is required")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if isinstance(self.alpha, (int, float)) and not self.alpha >= 0:
            raise ConfigError("alpha must be >= 0")
        names = [f.name for f in self.forces]
        if len(set(names)) != len(names) or "t" in names:
            raise ConfigError("force names must be unique and not 't'")
        if any(tau < 0 for tau in self.noise_taus):
            raise ConfigError("noise taus must be >= 0")
        # selection materializes force DOFs from the force list, so every
        # force DOF is in force_idx by construction
        object.__setattr__(self, "sensors", replace(self.sensors, force_idx=tuple(f.dof for f in self.forces)))

    @property
    def selection(self) -> SelectionConfig:
        return self.sensors

    @property
    def force_names(self) -> list[str]:
        return [f.name for f in self.forces]

    @property
    def displacement_dofs(self) -> tuple[int, ...]:
        return self.recover_dofs if self.recover_dofs is not None else tuple(f.dof for f in self.forces)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, noise=NoiseSpec(self.noise.tau, int(seed)))

    def with_tau(self, tau: float) -> "ExperimentConfig":
        return replace(self, noise=NoiseSpec(float(tau), self.noise.seed))


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _as_float(v, where: str) -> float:
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a number, got {v!r}") from exc


def _build(cls, data: dict | None, where: str, **extra):
    data = dict(data or {})
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    types = {f.name: str(f.type) for f in fields(cls)}
    for k, v in data.items():
        # YAML 1.1 reads "3.0e6" (no exponent sign) as a string
        numeric = "float" in types[k]
        if isinstance(v, list):
            data[k] = tuple(_as_float(x, f"{where}.{k}") if numeric else x for x in v)
        elif numeric and isinstance(v, str):
            data[k] = _as_float(v, f"{where}.{k}")
    try:
        return cls(**data, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_force(entry: dict, i: int) -> ForceSpec:
    where = f"forces[{i}]"
    if not isinstance(entry, dict) or "dof" not in entry:
        raise ConfigError(f"{where}: needs at least 'dof'")
    unknown = set(entry) - {"name", "dof", "sines", "random"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    if ("sines" in entry) == ("random" in entry):
        raise ConfigError(f"{where}: give exactly one of 'sines' or 'random'")
    if "sines" in entry:
        terms = tuple(_build(SineTerm, t, f"{where}.sines") for t in entry["sines"])
    else:
        r = dict(entry["random"])
        try:
            terms = random_terms(float(r.pop("band_hz")), int(r.pop("n_terms", 8)),
                                 float(r.pop("amplitude", 1.0)), int(r.pop("seed", 0)))
        except KeyError as exc:
            raise ConfigError(f"{where}.random: missing {exc}") from exc
        if r:
            raise ConfigError(f"{where}.random: unknown keys {sorted(r)}")
    return ForceSpec(str(entry.get("name", f"f{i + 1}")), int(entry["dof"]), terms)


def config_from_dict(raw: dict[str, Any], base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    raw = dict(raw or {})
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kw: dict[str, Any] = {}

    model = raw.pop("model", None) or {"toy": {}}
    if set(model) == {"manifest"}:
        kw["model"] = (base_dir / model["manifest"]).resolve()
    elif set(model) == {"toy"}:
        toy = dict(model["toy"] or {})
        for key in ("struct_fixed", "fluid_open"):
            if key in toy:
                toy[key] = tuple(bool(x) for x in toy[key])
        kw["model"] = _build(ToyModelSpec, toy, "model.toy")
    else:
        raise ConfigError("model: give exactly one of 'toy' or 'manifest'")

    kw["forces"] = tuple(_parse_force(e, i) for i, e in enumerate(raw.pop("forces", None) or []))
    if "rom" in raw:
        kw["rom"] = _build(RomSpec, raw.pop("rom"), "rom")
    if "damping" in raw:
        kw["damping"] = _build(DampingSpec, raw.pop("damping"), "damping")
    if "newmark" in raw:
        kw["newmark"] = _build(NewmarkParams, raw.pop("newmark"), "newmark")
    if "sensors" in raw:
        sensors = dict(raw.pop("sensors") or {})
        if "force_idx" in sensors:
            raise ConfigError("sensors: force DOFs come from the 'forces' list")
        kw["sensors"] = _build(SelectionConfig, sensors, "sensors")
    if "noise" in raw:
        kw["noise"] = _build(NoiseSpec, raw.pop("noise"), "noise")
    if "akf" in raw:
        kw["akf"] = _build(AkfSpec, raw.pop("akf"), "akf")
    if "comparison" in raw:
        kw["comparison"] = _build(ComparisonSpec, raw.pop("comparison"), "comparison")
    if "alpha" in raw:
        alpha = raw.pop("alpha")
        if isinstance(alpha, dict):
            if set(alpha) != {"l_curve"}:
                raise ConfigError("alpha: a mapping must be {l_curve: {...}}")
            kw["alpha"] = _build(LCurveSpec, alpha["l_curve"], "alpha.l_curve")
        else:
            kw["alpha"] = float(alpha)
    if "out_dir" in raw:
        kw["out_dir"] = base_dir / raw.pop("out_dir")
    for key, conv in (("method", str), ("duration", float), ("repeats", int), ("validate_k", int)):
        if key in raw:
            kw[key] = conv(raw.pop(key))
    if "noise_taus" in raw:
        kw["noise_taus"] = tuple(float(x) for x in raw.pop("noise_taus"))
    if "recover_dofs" in raw:
        kw["recover_dofs"] = tuple(int(x) for x in raw.pop("recover_dofs"))
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return config_from_dict(raw, base_dir=path.parent)
