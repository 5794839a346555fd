"""Built-in device presets and the YAML config format."""

from __future__ import annotations

import math
from pathlib import Path

import yaml
from scipy import optimize

from ripzz.device import (
    ConfigError,
    CouplingSpec,
    DeviceConfig,
    DriveSpec,
    LongResonatorSpec,
    QubitSpec,
    ResonatorSpec,
    dispersive_shift,
    dispersive_shift_state,
)
from ripzz.pulses import EnvelopeSpec

# (fsr, nu_l, nu_r, omega_l, omega_r, eta, g_ll, g_rr, g_pc, degree, delta, eps, gate_ns)
# everything in GHz except degree and gate time
_TABLE = {
    "fsr1400": (1.40, 6.9239, 6.9168, 5.000, 4.800, -0.280, 0.390, 0.428, 0.100, 3, 0.100, 0.200, 180.0),
    "fsr500": (0.50, 5.9808, 5.9820, 5.250, 5.200, -0.280, 0.120, 0.120, 0.080, 3, 0.070, 0.280, 205.0),
    "fsr300": (0.30, 5.9796, 5.9795, 5.150, 5.155, -0.280, 0.130, 0.130, 0.060, 7, 0.050, 0.200, 175.0),
    "fsr200": (0.20, 5.9854, 5.9853, 5.300, 5.305, -0.280, 0.100, 0.100, 0.050, 9, 0.040, 0.200, 165.0),
}

PRESET_NAMES = tuple(_TABLE)


def _build_preset(name: str) -> DeviceConfig:
    fsr, nl, nr, wl, wr, eta, gl, gr, gpc, d, delta, eps, gate = _TABLE[name]
    ql = QubitSpec(wl, eta, "left")
    qr = QubitSpec(wr, eta, "right")
    rl = ResonatorSpec(nl, 0.0, "left_drive")
    rr = ResonatorSpec(nr, 0.0, "right_drive")
    # the listed drive-resonator frequencies are bare; dressed by a ground-state
    # qubit they coincide, and the selected long-resonator mode sits there
    dl = nl + dispersive_shift_state(0, ql, rl, gl)
    dr = nr + dispersive_shift_state(0, qr, rr, gr)
    nu_c = round(0.5 * (dl + dr), 6)
    m = int(round(nu_c / fsr))
    lr = LongResonatorSpec(fsr, m, 5, nu_c)
    env = EnvelopeSpec.for_gate("polynomial", gate, degree=d)
    wd = round(nu_c - delta, 9)
    dphi = math.pi if m % 2 == 0 else 0.0
    return DeviceConfig(
        left_qubit=ql,
        right_qubit=qr,
        left_resonator=rl,
        right_resonator=rr,
        center_resonator=ResonatorSpec(nu_c, 0.0, "center"),
        long_resonator=lr,
        coupling=CouplingSpec(gl, gr, gpc, gpc),
        left_drive=DriveSpec(wd, 0.0, eps, env, "left_drive"),
        right_drive=DriveSpec(wd, dphi, eps, env, "right_drive"),
        preset_name=name,
    )


def preset(name: str) -> DeviceConfig:
    """One of the four built-in designs: fsr1400, fsr500, fsr300, fsr200."""
    if name not in _TABLE:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return _build_preset(name)


def preset_gate_time(name: str) -> float:
    return _TABLE[name][-1]


def _qubit_side(chi: float, qubit: QubitSpec, dressed: float, label: str):
    """Coupling and bare resonator frequency giving shift ``chi`` at ``dressed``."""
    if not chi < 0:
        raise ConfigError("the dispersive shift of a resonator above the qubit is negative")

    def residual(x):
        g, nu = x
        p = ResonatorSpec(nu, 0.0, label)
        return [
            dispersive_shift(qubit, p, g) - chi,
            nu + dispersive_shift_state(0, qubit, p, g) - dressed,
        ]

    sol = optimize.root(residual, [0.3, dressed], method="hybr", tol=1e-14)
    if not sol.success:
        raise ConfigError(f"cannot realise dispersive shift {chi!r} GHz: {sol.message}")
    return abs(float(sol.x[0])), float(sol.x[1])


def reduced_device(
    chi_left: float,
    chi_right: float,
    g: float,
    detuning: float,
    amplitude: float,
    envelope: EnvelopeSpec | None = None,
    kappa: float = 0.0,
    resonator_frequency: float = 7.0,
    qubit_frequency: float = 5.0,
    anharmonicity: float = -0.28,
) -> DeviceConfig:
    """Symmetric single-mode device with prescribed dispersive shifts.

    Both drive resonators sit, dressed, at ``resonator_frequency``, and so
    does the center mode.  The selected long-resonator mode index is even, so
    the antiphase drive used here is the dark configuration.

    Parameters
    ----------
    chi_left, chi_right : float
        Signed dispersive shifts in GHz (negative).
    g : float
        Drive-resonator to center coupling in GHz.
    detuning : float
        Dressed resonator frequency minus drive frequency, GHz.
    amplitude : float
        Peak drive amplitude in GHz, the same on both sides.
    envelope : EnvelopeSpec, optional
        Defaults to a 200 ns cubic polynomial envelope.
    """
    ql = QubitSpec(qubit_frequency, anharmonicity, "left")
    qr = QubitSpec(qubit_frequency, anharmonicity, "right")
    gl, nl = _qubit_side(chi_left, ql, resonator_frequency, "left_drive")
    gr, nr = _qubit_side(chi_right, qr, resonator_frequency, "right_drive")
    env = envelope or EnvelopeSpec.for_gate("polynomial", 200.0, degree=3)
    wd = resonator_frequency - detuning
    return DeviceConfig(
        left_qubit=ql,
        right_qubit=qr,
        left_resonator=ResonatorSpec(nl, kappa, "left_drive"),
        right_resonator=ResonatorSpec(nr, kappa, "right_drive"),
        center_resonator=ResonatorSpec(resonator_frequency, 0.0, "center"),
        long_resonator=LongResonatorSpec(resonator_frequency / 4, 4, 1, resonator_frequency),
        coupling=CouplingSpec(gl, gr, g, g),
        left_drive=DriveSpec(wd, 0.0, amplitude, env, "left_drive"),
        right_drive=DriveSpec(wd, math.pi, amplitude, env, "right_drive"),
    )


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return float(obj)
    return obj


def device_to_dict(device: DeviceConfig) -> dict:
    return _plain(device.to_dict())


def dumps(device: DeviceConfig) -> str:
    return yaml.safe_dump(device_to_dict(device), sort_keys=False, allow_unicode=True)


def loads(text: str, source: str = "<string>") -> DeviceConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{where}: malformed YAML ({getattr(exc, 'problem', exc)})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    if "preset" in data and len(data) == 1:
        return preset(data["preset"])
    try:
        return DeviceConfig.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load(path: str | Path) -> DeviceConfig:
    path = Path(path)
    return loads(path.read_text(encoding="utf-8"), source=str(path))


def dump(device: DeviceConfig, path: str | Path) -> None:
    Path(path).write_text(dumps(device), encoding="utf-8")
