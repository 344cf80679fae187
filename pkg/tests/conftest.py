"""Shared fixtures: the rod/tube/piston toy (180 DOFs reduced to 30 + 30) and its forces."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from vibroforce.config import load_config
from vibroforce.rom import DampingSpec, RomSpec, reduce_system
from vibroforce.system_model import SelectionConfig, ToyModelSpec, generate_toy

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

FORCE_DOFS = (10, 30, 50, 70)
SENSOR_DOFS = (11, 31, 51, 71, 21, 61)
DAMPING = DampingSpec(a1s=10.0, a2s=1e-6, a1f=10.0, a2f=1e-6)


def sinusoid_forces(t: np.ndarray) -> np.ndarray:
    """Four two-tone excitations, amplitudes in N and angular rates in rad/s."""
    p = math.pi
    return np.column_stack([
        200 * np.sin(30 * p * t) + 370 * np.sin(175 * p * t),
        500 * np.sin(100 * p * t) + 460 * np.sin(95 * p * t),
        460 * np.sin(150 * p * t) + 280 * np.sin(30 * p * t),
        280 * np.sin(120 * p * t) + 370 * np.sin(23 * p * t),
    ])


@pytest.fixture(scope="session")
def toy_system():
    return generate_toy(ToyModelSpec(n_struct_elems=90, n_fluid_elems=90))


@pytest.fixture(scope="session")
def toy_rom(toy_system):
    return reduce_system(toy_system, RomSpec(30, 30), DAMPING)


@pytest.fixture(scope="session")
def acc_selection():
    return SelectionConfig(acc_idx=SENSOR_DOFS, force_idx=FORCE_DOFS)


@pytest.fixture(scope="session")
def disp_selection():
    return SelectionConfig(disp_idx=SENSOR_DOFS, force_idx=FORCE_DOFS)


@pytest.fixture(scope="session")
def small_toy():
    return generate_toy(ToyModelSpec(n_struct_elems=12, n_fluid_elems=12))


@pytest.fixture
def paper_layout_config():
    return load_config(CONFIG_DIR / "paper_layout.yaml")


@pytest.fixture
def noisy_config():
    return load_config(CONFIG_DIR / "noisy_displacement.yaml")


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
