"""Several harmonics of the long-distance resonator on the bus."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ripzz.device import DeviceConfig
from ripzz.dynamics import (
    DEFAULT_DT,
    InteractionMatrix,
    build_interaction_matrix,
    steady_state_zz,
    steady_state_zz_algebraic,
)


@dataclass(frozen=True)
class ModeLadder:
    """Retained long-resonator modes with their drive-resonator couplings (GHz)."""

    indices: tuple[int, ...]
    frequencies: np.ndarray
    g_left: np.ndarray
    g_right: np.ndarray

    def __post_init__(self):
        if len(self.indices) < 1:
            raise ValueError("ladder needs at least one mode")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("mode frequencies must increase strictly")

    @property
    def size(self) -> int:
        return len(self.indices)


def mode_ladder(device: DeviceConfig, mode_count: int | None = None) -> ModeLadder:
    """Symmetric window of modes centred on the selected one.

    Couplings have the same magnitude for every mode; the right-hand coupling
    carries the standing-wave parity (-1)**m.  Windows are clipped at m = 0.
    """
    lr = device.long_resonator
    count = lr.mode_count if mode_count is None else mode_count
    if count < 1:
        raise ValueError("mode_count must be >= 1")
    m0 = lr.selected_mode_index
    lo = m0 - (count - 1) // 2
    hi = lo + count - 1
    if lo < 0:
        lo, hi = 0, count - 1
    idx = np.arange(lo, hi + 1)
    freqs = device.center_resonator.frequency + (idx - m0) * lr.fsr
    c = device.coupling
    sign = np.where(idx % 2 == 0, 1.0, -1.0)
    return ModeLadder(
        tuple(int(i) for i in idx),
        freqs,
        np.full(idx.size, c.g_left_center),
        sign * c.g_right_center,
    )


def build_multimode_matrix(
    jk: str, device: DeviceConfig, ladder: ModeLadder, drive_frequency: float | None = None
) -> InteractionMatrix:
    return build_interaction_matrix(jk, device, drive_frequency=drive_frequency, ladder=ladder)


def with_fsr(device: DeviceConfig, fsr: float) -> DeviceConfig:
    """Same resonant mode frequency, new FSR; the mode index follows."""
    nu = device.center_resonator.frequency
    m = max(int(round(nu / fsr)), 1)
    return replace(device, long_resonator=replace(device.long_resonator, fsr=fsr, selected_mode_index=m))


def dark_phase(device: DeviceConfig) -> float:
    """Drive phase difference that keeps the selected mode dark: pi for even m, 0 for odd."""
    return math.pi if device.long_resonator.selected_mode_index % 2 == 0 else 0.0


@dataclass
class FSRPoint:
    fsr: float
    mode_index: int
    zz_multimode: float  # MHz
    zz_single_mode: float  # MHz
    mode_count: int


def zz_vs_fsr(
    device: DeviceConfig,
    fsrs,
    mode_count: int = 5,
    numeric: bool = True,
    dt: float = DEFAULT_DT,
    follow_parity: bool = True,
) -> list[FSRPoint]:
    """ZZ rate (MHz) against FSR with ``mode_count`` retained modes.

    With ``follow_parity`` the drive phase difference is set to the dark value
    for each FSR's mode index.  ``numeric=False`` uses the constant-drive fixed
    point instead of a time-domain run.
    """
    out = []
    for fsr in fsrs:
        if not fsr > 0:
            raise ValueError("FSR values must be positive")
        dev = with_fsr(device, float(fsr))
        if follow_parity:
            dev = dev.with_drive(phase_difference=dark_phase(dev) + 0.0)
        lad = mode_ladder(dev, mode_count)
        if numeric:
            zz_m = steady_state_zz(dev, dt=dt, ladder=lad).zz_rate_numeric
            zz_1 = steady_state_zz(dev, dt=dt).zz_rate_numeric
        else:
            zz_m = steady_state_zz_algebraic(dev, lad)
            zz_1 = steady_state_zz_algebraic(dev)
        out.append(FSRPoint(float(fsr), dev.long_resonator.selected_mode_index, float(zz_m), float(zz_1), mode_count))
    return out


@dataclass
class ConvergenceRow:
    mode_count: int
    nearest_excluded_detuning: float  # GHz, from the drive resonators
    zz: float  # MHz
    relative_change: float  # vs previous row
    rule_satisfied: bool  # nearest excluded mode >= ratio * g


@dataclass
class ConvergenceReport:
    rows: list[ConvergenceRow]
    ratio: float
    tolerance: float

    @property
    def ok(self) -> bool:
        """Every step taken inside the rule's region changed ZZ by less than ``tolerance``."""
        return all(
            cur.relative_change < self.tolerance
            for prev, cur in zip(self.rows, self.rows[1:])
            if prev.rule_satisfied
        )


def convergence_check(
    device: DeviceConfig,
    mode_counts=(1, 3, 5, 7, 9),
    ratio: float = 13.0,
    tolerance: float = 0.01,
    numeric: bool = False,
    dt: float = DEFAULT_DT,
) -> ConvergenceReport:
    """Relative ZZ change as mode pairs are added.

    A row's ``rule_satisfied`` flag says whether the nearest mode it leaves out
    is detuned from the drive resonators by at least ``ratio`` times the
    resonator-resonator coupling; the report's ``ok`` checks that every step
    taken from such a row changes ZZ by less than ``tolerance``.
    """
    g = max(device.coupling.g_left_center, device.coupling.g_right_center)
    fsr = device.long_resonator.fsr
    rows: list[ConvergenceRow] = []
    prev = None
    for mc in sorted(mode_counts):
        lad = mode_ladder(device, mc)
        if numeric:
            zz = steady_state_zz(device, dt=dt, ladder=lad).zz_rate_numeric
        else:
            zz = steady_state_zz_algebraic(device, lad)
        half = (mc - 1) // 2
        excluded = (half + 1) * fsr
        change = math.nan if prev is None else (abs(zz / prev - 1) if prev else (0.0 if zz == 0 else math.inf))
        rows.append(ConvergenceRow(mc, excluded, float(zz), change, g == 0 or excluded >= ratio * g))
        prev = zz
    return ConvergenceReport(rows, ratio, tolerance)
