"""Static device description and the closed-form dispersive algebra built on it.

All frequencies are ordinary frequencies in GHz (not angular).  Conversion to
rad/ns happens only inside the integrators.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from ripzz.pulses import EnvelopeSpec

#: Detunings smaller than this (GHz, i.e. 1 kHz) are treated as degenerate.
DEGENERATE_EPS = 1e-6


class DegenerateDetuningError(ValueError):
    """A denominator of a dispersive expression is (numerically) zero."""


class ConfigError(ValueError):
    """Raised for malformed or inconsistent device configurations."""


def _check_detuning(x: float, what: str) -> None:
    if abs(x) < DEGENERATE_EPS:
        raise DegenerateDetuningError(f"degenerate detuning in {what}: {x!r} GHz")


@dataclass(frozen=True)
class QubitSpec:
    bare_frequency: float
    anharmonicity: float
    label: str

    def __post_init__(self):
        if self.label not in ("left", "right"):
            raise ConfigError(f"qubit label must be 'left' or 'right', got {self.label!r}")
        if not self.bare_frequency > 0:
            raise ConfigError("qubit frequency must be positive")
        if not self.anharmonicity < 0:
            raise ConfigError("transmon anharmonicity must be negative")
        if abs(self.anharmonicity) >= self.bare_frequency:
            raise ConfigError("|anharmonicity| must be smaller than the qubit frequency")


@dataclass(frozen=True)
class ResonatorSpec:
    frequency: float
    decay_rate: float = 0.0
    label: str = "center"

    def __post_init__(self):
        if self.label not in ("left_drive", "right_drive", "center"):
            raise ConfigError(f"bad resonator label {self.label!r}")
        if not self.frequency > 0:
            raise ConfigError("resonator frequency must be positive")
        if self.decay_rate < 0:
            raise ConfigError("decay rate must be non-negative")


@dataclass(frozen=True)
class LongResonatorSpec:
    """Harmonic ladder of the long-distance resonator around the selected mode."""

    fsr: float
    selected_mode_index: int
    mode_count: int = 5
    base_frequency: float = 0.0

    def __post_init__(self):
        if not self.fsr > 0:
            raise ConfigError("FSR must be positive")
        if self.mode_count < 1:
            raise ConfigError("mode_count must be >= 1")
        if self.selected_mode_index < 0:
            raise ConfigError("mode index must be non-negative")

    @property
    def parity_sign(self) -> int:
        """Sign of the right-drive coupling to the selected mode, (-1)**m."""
        return -1 if self.selected_mode_index % 2 else 1


@dataclass(frozen=True)
class CouplingSpec:
    g_left_qubit: float
    g_right_qubit: float
    g_left_center: float
    g_right_center: float
    g_left_qubit_center: float = 0.0
    g_right_qubit_center: float = 0.0

    def __post_init__(self):
        for name in ("g_left_qubit", "g_right_qubit", "g_left_center", "g_right_center"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} is a magnitude and must be >= 0")


@dataclass(frozen=True)
class DriveSpec:
    frequency: float
    phase: float
    amplitude: float
    envelope: EnvelopeSpec
    target: str

    def __post_init__(self):
        if self.target not in ("left_drive", "right_drive"):
            raise ConfigError(f"drive target must be left_drive/right_drive, got {self.target!r}")
        if self.amplitude < 0:
            raise ConfigError("drive amplitude must be >= 0")
        if not 0 <= self.phase < 2 * math.pi:
            raise ConfigError("drive phase must lie in [0, 2*pi)")


@dataclass(frozen=True)
class DeviceConfig:
    left_qubit: QubitSpec
    right_qubit: QubitSpec
    left_resonator: ResonatorSpec
    right_resonator: ResonatorSpec
    center_resonator: ResonatorSpec
    long_resonator: LongResonatorSpec
    coupling: CouplingSpec
    left_drive: DriveSpec
    right_drive: DriveSpec
    preset_name: str | None = None

    def __post_init__(self):
        labels = [
            (self.left_qubit.label, "left"),
            (self.right_qubit.label, "right"),
            (self.left_resonator.label, "left_drive"),
            (self.right_resonator.label, "right_drive"),
            (self.center_resonator.label, "center"),
            (self.left_drive.target, "left_drive"),
            (self.right_drive.target, "right_drive"),
        ]
        for got, want in labels:
            if got != want:
                raise ConfigError(f"expected role {want!r}, found {got!r}")
        if abs(self.left_drive.frequency - self.right_drive.frequency) > 1e-12:
            raise ConfigError("both drives must share one carrier frequency")

    # convenience accessors -------------------------------------------------

    @property
    def drive_frequency(self) -> float:
        return self.left_drive.frequency

    def dispersive_shifts(self) -> tuple[float, float]:
        """Signed (left, right) dispersive shifts in GHz."""
        return (
            dispersive_shift(self.left_qubit, self.left_resonator, self.coupling.g_left_qubit),
            dispersive_shift(self.right_qubit, self.right_resonator, self.coupling.g_right_qubit),
        )

    def dressed_resonator_frequencies(self) -> tuple[float, float]:
        """Drive-resonator frequencies with their qubit in the ground state."""
        return (
            dressed_resonator_frequency(
                self.left_qubit, self.left_resonator, self.coupling.g_left_qubit
            ),
            dressed_resonator_frequency(
                self.right_qubit, self.right_resonator, self.coupling.g_right_qubit
            ),
        )

    def detunings(self) -> tuple[float, float, float]:
        """(left, center, right) detunings of the dressed modes from the drive, GHz."""
        nl, nr = self.dressed_resonator_frequencies()
        wd = self.drive_frequency
        return nl - wd, self.center_resonator.frequency - wd, nr - wd

    def with_drive(self, **changes: Any) -> "DeviceConfig":
        """Copy with the same field changes applied to both drives.

        ``phase_difference`` sets the right drive's phase relative to the left.
        """
        dphi = changes.pop("phase_difference", None)
        left = replace(self.left_drive, **changes)
        right = replace(self.right_drive, **changes)
        if dphi is not None:
            right = replace(right, phase=float((left.phase + dphi) % (2 * math.pi)))
        return replace(self, left_drive=left, right_drive=right)

    def with_detuning(self, delta: float) -> "DeviceConfig":
        """Retune the drive carrier so that the mean dressed detuning is ``delta``."""
        nl, nr = self.dressed_resonator_frequencies()
        return self.with_drive(frequency=0.5 * (nl + nr) - delta)

    def with_envelope(self, envelope: EnvelopeSpec) -> "DeviceConfig":
        return self.with_drive(envelope=envelope)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceConfig":
        try:
            return cls(
                left_qubit=QubitSpec(**data["left_qubit"]),
                right_qubit=QubitSpec(**data["right_qubit"]),
                left_resonator=ResonatorSpec(**data["left_resonator"]),
                right_resonator=ResonatorSpec(**data["right_resonator"]),
                center_resonator=ResonatorSpec(**data["center_resonator"]),
                long_resonator=LongResonatorSpec(**data["long_resonator"]),
                coupling=CouplingSpec(**data["coupling"]),
                left_drive=_drive_from_dict(data["left_drive"]),
                right_drive=_drive_from_dict(data["right_drive"]),
                preset_name=data.get("preset_name"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config section or field: {exc.args[0]}") from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _drive_from_dict(d: dict) -> DriveSpec:
    d = dict(d)
    env = d.pop("envelope")
    if isinstance(env, dict):
        env = EnvelopeSpec.from_dict(env)
    return DriveSpec(envelope=env, **d)


# ---------------------------------------------------------------------------
# closed-form dispersive algebra
# ---------------------------------------------------------------------------


def dressed_qubit_frequency(q: QubitSpec, p: ResonatorSpec, g: float) -> float:
    """Lamb-shifted qubit frequency, omega + g**2 / (omega - nu)."""
    det = q.bare_frequency - p.frequency
    _check_detuning(det, "dressed_qubit_frequency")
    return q.bare_frequency + g**2 / det


def dispersive_shift_state(n: int, q: QubitSpec, p: ResonatorSpec, g: float) -> float:
    """Resonator pull produced by the qubit sitting in level ``n`` (0 or 1)."""
    if n not in (0, 1):
        raise ValueError("n must be 0 or 1")
    w, eta, nu = q.bare_frequency, q.anharmonicity, p.frequency
    a = w + n * eta - nu
    b = w + (n - 1) * eta - nu
    _check_detuning(a, "dispersive_shift_state")
    _check_detuning(b, "dispersive_shift_state")
    return g**2 * (eta - w + nu) / (a * b)


def dispersive_shift(q: QubitSpec, p: ResonatorSpec, g: float) -> float:
    """Signed dispersive shift chi_1 - chi_0 (GHz).  Negative for resonators above the qubit."""
    return dispersive_shift_state(1, q, p, g) - dispersive_shift_state(0, q, p, g)


def dressed_resonator_frequency(q: QubitSpec, p: ResonatorSpec, g: float) -> float:
    """Resonator frequency with the qubit in its ground state, nu + chi_0."""
    return p.frequency + dispersive_shift_state(0, q, p, g)


def mode_frequency(device: DeviceConfig, m: int) -> float:
    """Frequency of long-resonator mode ``m`` on the FSR ladder (GHz)."""
    lr = device.long_resonator
    return device.center_resonator.frequency + (m - lr.selected_mode_index) * lr.fsr


def effective_xx_coupling(m: int, device: DeviceConfig, side: str = "left") -> float:
    """Drive-resonator-mediated exchange between a qubit and long-resonator mode ``m``."""
    if side == "left":
        q, p = device.left_qubit, device.left_resonator
        gqp, gpc = device.coupling.g_left_qubit, device.coupling.g_left_center
    elif side == "right":
        q, p = device.right_qubit, device.right_resonator
        gqp = device.coupling.g_right_qubit
        gpc = device.coupling.g_right_center * (-1) ** m
    else:
        raise ValueError("side must be 'left' or 'right'")
    wt = dressed_qubit_frequency(q, p, gqp)
    nu = p.frequency
    num = mode_frequency(device, m)
    for x in (wt - nu, num - nu, wt + nu, num + nu):
        _check_detuning(x, "effective_xx_coupling")
    return 0.5 * gqp * gpc * (1 / (wt - nu) + 1 / (num - nu) - 1 / (wt + nu) - 1 / (num + nu))


def critical_photon(delta: float, eta: float, g: float) -> float:
    """Critical photon number ((delta + eta)**2 / 4g**2 - 1) / 3."""
    if g == 0:
        raise ValueError("critical photon number undefined for g = 0")
    return ((delta + eta) ** 2 / (4 * g**2) - 1) / 3


def device_critical_photons(device: DeviceConfig) -> tuple[float, float]:
    c = device.coupling
    return (
        critical_photon(
            device.left_qubit.bare_frequency - device.left_resonator.frequency,
            device.left_qubit.anharmonicity,
            c.g_left_qubit,
        ),
        critical_photon(
            device.right_qubit.bare_frequency - device.right_resonator.frequency,
            device.right_qubit.anharmonicity,
            c.g_right_qubit,
        ),
    )


@dataclass(frozen=True)
class StaticCouplings:
    j_xx: float
    xi_zz: float
    approximate: bool


def static_couplings(device: DeviceConfig) -> StaticCouplings:
    """Residual static XX and ZZ couplings of the undriven bus.

    The expressions assume a symmetric device.  For asymmetric parameters the
    left/right means are used and ``approximate`` is set.
    """
    c = device.coupling
    g1s = (c.g_left_qubit, c.g_right_qubit)
    g2s = (c.g_left_center, c.g_right_center)
    dets = (
        device.left_qubit.bare_frequency - device.left_resonator.frequency,
        device.right_qubit.bare_frequency - device.right_resonator.frequency,
    )
    approx = not (
        math.isclose(*g1s, rel_tol=1e-12)
        and math.isclose(*g2s, rel_tol=1e-12)
        and math.isclose(*dets, rel_tol=1e-12)
    )
    return static_couplings_from(sum(g1s) / 2, sum(g2s) / 2, sum(dets) / 2, approximate=approx)


def static_couplings_from(
    g1: float, g2: float, detuning: float, approximate: bool = False
) -> StaticCouplings:
    _check_detuning(detuning, "static_couplings")
    jxx = g1**2 * g2**2 / detuning**3
    return StaticCouplings(jxx, 12 * jxx**2 / detuning, approximate)


# ---------------------------------------------------------------------------
# regime validation
# ---------------------------------------------------------------------------


@dataclass
class RegimeCheck:
    name: str
    ratio: float
    status: str  # "pass" | "warn" | "fail"


@dataclass
class RegimeReport:
    checks: list[RegimeCheck] = field(default_factory=list)
    leakage_ratio: float = 0.0
    leakage_target: float = 0.1
    multimode_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [asdict(c) for c in self.checks],
            "leakage_ratio": self.leakage_ratio,
            "leakage_target": self.leakage_target,
            "fsr_over_g": self.multimode_ratio,
        }


def validate_regime(device: DeviceConfig, ratio: float = 5.0, fail_ratio: float = 3.0) -> RegimeReport:
    """Check |omega - nu| >> g_qp >> g_pc on both sides.

    A ratio below ``ratio`` warns, below ``fail_ratio`` fails.  The report also
    carries 2 J_m / FSR for the neighbouring mode, to compare with the ~0.1
    design target, and FSR / g_pc for the multimode truncation rule.
    """
    if ratio < 1 or fail_ratio < 1:
        raise ValueError("ratios must be >= 1")
    fail_ratio = min(fail_ratio, ratio)

    def grade(r: float) -> str:
        if r >= ratio:
            return "pass"
        return "warn" if r >= fail_ratio else "fail"

    c = device.coupling
    report = RegimeReport()
    sides = (
        ("left", device.left_qubit, device.left_resonator, c.g_left_qubit, c.g_left_center),
        ("right", device.right_qubit, device.right_resonator, c.g_right_qubit, c.g_right_center),
    )
    for side, q, p, gqp, gpc in sides:
        det = abs(q.bare_frequency - p.frequency)
        r1 = det / gqp if gqp else math.inf
        r2 = gqp / gpc if gpc else math.inf
        report.checks.append(RegimeCheck(f"{side}: |omega-nu|/g_qp", r1, grade(r1)))
        report.checks.append(RegimeCheck(f"{side}: g_qp/g_pc", r2, grade(r2)))

    lr = device.long_resonator
    m = lr.selected_mode_index
    # ladder mode closest to each qubit is the worst leakage channel
    leak = 0.0
    for side in ("left", "right"):
        q = device.left_qubit if side == "left" else device.right_qubit
        k = max(m + round((q.bare_frequency - device.center_resonator.frequency) / lr.fsr), 0)
        try:
            leak = max(leak, abs(2 * effective_xx_coupling(k, device, side) / lr.fsr))
        except DegenerateDetuningError:
            leak = math.inf
    report.leakage_ratio = leak
    gpc = max(c.g_left_center, c.g_right_center)
    report.multimode_ratio = lr.fsr / gpc if gpc else math.inf
    return report
