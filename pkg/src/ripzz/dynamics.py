"""Qubit-state-conditioned coherent amplitudes of the driven resonator bus.

For every computational state |jk> the bus amplitudes obey the linear system

    d(alpha)/dt = A_jk alpha - (i/2) E(t),     A_jk = -i H_jk - K/2

with H_jk the (Hermitian) mode-coupling matrix in the drive frame and K the
decay rates.  All matrix entries are in GHz; the integrators multiply by 2*pi.
Mode order is (left drive resonator, long-resonator modes..., right drive
resonator).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.signal import lfilter

from ripzz.device import DEGENERATE_EPS, DegenerateDetuningError, DeviceConfig, device_critical_photons
from ripzz.pulses import EnvelopeSpec, evaluate_envelope, rescale_envelope

STATES = ("00", "01", "10", "11")
TWO_PI = 2 * math.pi
DEFAULT_DT = 0.02
BLOWUP = 1e6


class IntegrationError(RuntimeError):
    """Amplitudes diverged; the step is too large for the spectrum."""


class GridMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# interaction matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InteractionMatrix:
    state: str
    hamiltonian: np.ndarray  # Hermitian, GHz
    decay: np.ndarray  # kappa per mode, GHz
    drive: np.ndarray  # complex drive amplitude per mode, GHz

    @property
    def matrix(self) -> np.ndarray:
        """A = -i H - K/2 (GHz)."""
        return -1j * self.hamiltonian - 0.5 * np.diag(self.decay)

    @property
    def size(self) -> int:
        return self.hamiltonian.shape[0]


def _ladder_arrays(device: DeviceConfig, ladder):
    if ladder is None:
        c = device.coupling
        s = device.long_resonator.parity_sign
        return (
            np.array([device.center_resonator.frequency]),
            np.array([c.g_left_center]),
            np.array([s * c.g_right_center]),
        )
    return (
        np.asarray(ladder.frequencies, dtype=float),
        np.asarray(ladder.g_left, dtype=float),
        np.asarray(ladder.g_right, dtype=float),
    )


def build_interaction_matrix(
    jk: str, device: DeviceConfig, drive_frequency: float | None = None, ladder=None
) -> InteractionMatrix:
    """Coupling matrix for qubit state ``jk``.

    Without a ``ladder`` only the selected long-resonator mode is kept (3x3).
    An excited left (right) qubit shifts the left (right) drive-resonator
    diagonal by its signed dispersive shift; long-resonator modes are
    state-independent.
    """
    if jk not in STATES:
        raise ValueError(f"state must be one of {STATES}")
    wd = device.drive_frequency if drive_frequency is None else drive_frequency
    freqs, gl, gr = _ladder_arrays(device, ladder)
    nm = freqs.size
    n = nm + 2
    chi_l, chi_r = device.dispersive_shifts()
    nu_l, nu_r = device.dressed_resonator_frequencies()

    h = np.zeros((n, n))
    h[0, 0] = nu_l - wd + int(jk[0]) * chi_l
    h[-1, -1] = nu_r - wd + int(jk[1]) * chi_r
    idx = np.arange(1, nm + 1)
    h[idx, idx] = freqs - wd
    h[0, idx] = h[idx, 0] = gl
    h[-1, idx] = h[idx, -1] = gr

    decay = np.zeros(n)
    decay[0] = device.left_resonator.decay_rate
    decay[-1] = device.right_resonator.decay_rate
    decay[idx] = device.center_resonator.decay_rate

    e = np.zeros(n, dtype=complex)
    e[0] = device.left_drive.amplitude * np.exp(1j * device.left_drive.phase)
    e[-1] = device.right_drive.amplitude * np.exp(1j * device.right_drive.phase)
    return InteractionMatrix(jk, h, decay, e)


def interaction_matrices(device: DeviceConfig, ladder=None) -> dict[str, InteractionMatrix]:
    return {s: build_interaction_matrix(s, device, ladder=ladder) for s in STATES}


def dispersive_weights(device: DeviceConfig, size: int) -> dict[str, np.ndarray]:
    """chi~_jk - chi~_00 per mode (GHz): only drive resonators carry weight."""
    chi_l, chi_r = device.dispersive_shifts()
    out = {}
    for s in STATES:
        w = np.zeros(size)
        w[0] = int(s[0]) * chi_l
        w[-1] = int(s[1]) * chi_r
        out[s] = w
    return out


# ---------------------------------------------------------------------------
# time-domain integration
# ---------------------------------------------------------------------------


@dataclass
class AmplitudeTrajectory:
    dt: float
    times: np.ndarray
    amplitudes: dict[str, np.ndarray]  # state -> (steps+1, modes) complex

    @property
    def terminal_photons(self) -> dict[str, np.ndarray]:
        return {s: np.abs(a[-1]) ** 2 for s, a in self.amplitudes.items()}

    @property
    def residual_photons(self) -> float:
        """Worst-state total photon number at the final time."""
        return max(float(p.sum()) for p in self.terminal_photons.values())


def _envelope_samples(device: DeviceConfig, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out = []
    for drv in (device.left_drive, device.right_drive):
        env = drv.envelope
        vals = np.zeros_like(times)
        inside = times <= env.duration * (1 + 1e-12)
        vals[inside] = evaluate_envelope(env, np.minimum(times[inside], env.duration))
        out.append(vals)
    return out[0], out[1]


def _rk4_maps(a: np.ndarray, h: float):
    """Matrices (P, B0, Bh, B1) such that one classical RK4 step of
    y' = a y + b(t) reads y+ = P y + B0 b(t) + Bh b(t+h/2) + B1 b(t+h)."""
    n = a.shape[0]
    eye = np.eye(n)
    ha = h * a
    ha2 = ha @ ha
    ha3 = ha2 @ ha
    p = eye + ha + ha2 / 2 + ha3 / 6 + ha3 @ ha / 24
    b0 = h / 6 * (eye + ha + ha2 / 2 + ha3 / 4)
    bh = h / 6 * (4 * eye + 2 * ha + ha2 / 2)
    b1 = h / 6 * eye
    return p, b0, bh, b1


def _propagate(p: np.ndarray, forcing: np.ndarray, y0: np.ndarray | None = None) -> np.ndarray:
    """Run y[n+1] = p y[n] + forcing[n] for all n; forcing has shape (..., steps, modes).

    Evaluated in the eigenbasis of ``p`` with a first-order recursive filter,
    falling back to the plain loop if ``p`` is badly conditioned.
    """
    steps, n = forcing.shape[-2], forcing.shape[-1]
    lam, w = np.linalg.eig(p)
    if np.linalg.cond(w) < 1e8:
        winv = np.linalg.inv(w)
        f = forcing @ winv.T  # (..., steps, n)
        g = np.empty(forcing.shape[:-2] + (steps + 1, n), dtype=complex)
        z0 = np.zeros(forcing.shape[:-2] + (n,), complex) if y0 is None else y0 @ winv.T
        g[..., 0, :] = z0
        for k in range(n):
            zi = (lam[k] * z0[..., k])[..., None]
            g[..., 1:, k], _ = lfilter([1.0], [1.0, -lam[k]], f[..., k], axis=-1, zi=zi)
        return g @ w.T
    y = np.empty(forcing.shape[:-2] + (steps + 1, n), dtype=complex)
    y[..., 0, :] = 0 if y0 is None else y0
    for i in range(steps):
        y[..., i + 1, :] = y[..., i, :] @ p.T + forcing[..., i, :]
    return y


def integrate_amplitudes(
    device: DeviceConfig,
    duration: float | None = None,
    dt: float = DEFAULT_DT,
    ladder=None,
) -> AmplitudeTrajectory:
    """Fixed-step RK4 solution for all four qubit states from the vacuum.

    ``duration`` defaults to the longer of the two drive envelopes; beyond an
    envelope's end its drive is off.
    """
    if duration is None:
        duration = max(device.left_drive.envelope.duration, device.right_drive.envelope.duration)
    steps = int(round(duration / dt))
    if steps < 1 or abs(steps * dt - duration) > 1e-9 * max(duration, 1):
        raise ValueError(f"duration {duration} is not a multiple of dt={dt}")
    times = dt * np.arange(steps + 1)
    half = dt * np.arange(2 * steps + 1) / 2
    env_l, env_r = _envelope_samples(device, half)

    amps = {}
    for s, im in interaction_matrices(device, ladder).items():
        a = TWO_PI * im.matrix
        p, b0, bh, b1 = _rk4_maps(a, dt)
        # b(t) = -(i/2) * 2pi * E * env(t) per drive
        vl = np.zeros(im.size, complex)
        vr = np.zeros(im.size, complex)
        vl[0] = -0.5j * TWO_PI * im.drive[0]
        vr[-1] = -0.5j * TWO_PI * im.drive[-1]
        forcing = (
            np.outer(env_l[0:-1:2], b0 @ vl)
            + np.outer(env_l[1::2], bh @ vl)
            + np.outer(env_l[2::2], b1 @ vl)
            + np.outer(env_r[0:-1:2], b0 @ vr)
            + np.outer(env_r[1::2], bh @ vr)
            + np.outer(env_r[2::2], b1 @ vr)
        )
        y = _propagate(p, forcing)
        if not np.all(np.isfinite(y)) or np.abs(y).max() > BLOWUP:
            rho = np.abs(np.linalg.eigvals(p)).max()
            raise IntegrationError(
                f"amplitudes diverged for state {s} (RK4 spectral radius {rho:.6f}); reduce dt"
            )
        amps[s] = y
    return AmplitudeTrajectory(dt, times, amps)


# ---------------------------------------------------------------------------
# eigenmode (spectral) solution
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
#: Largest kernel phase (rad) covered by one Gauss-Legendre panel.
_GL_PHASE = 2.0


def _breakpoints(device: DeviceConfig) -> list[float]:
    pts = set()
    for drv in (device.left_drive, device.right_drive):
        env = drv.envelope
        pts.update([0.0, env.rise_time, env.rise_time + env.plateau, env.duration])
    return sorted(pts)


def spectral_trajectory(
    device: DeviceConfig, times: np.ndarray, ladder=None, cond_limit: float = 1e8
) -> AmplitudeTrajectory:
    """Amplitudes at ``times`` from the eigen-decomposition A = V D V^-1.

    Each eigenmode is advanced exactly between grid points,
    beta(t+h) = e^{D h} beta(t) + int e^{D (t+h-s)} E'(s) ds,
    with the drive integral done by 10-point Gauss-Legendre on panels that
    never straddle an envelope kink and are short against the fastest
    eigenmode.
    """
    times = np.asarray(times, dtype=float)
    if times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must start at 0 and increase")
    bps = _breakpoints(device)
    amps = {}
    for s, im in interaction_matrices(device, ladder).items():
        a = TWO_PI * im.matrix
        d, v = np.linalg.eig(a)
        cond = np.linalg.cond(v)
        if cond > cond_limit:
            warnings.warn(f"ill-conditioned eigenbasis for state {s} (cond={cond:.2e})", stacklevel=2)
        vinv = np.linalg.inv(v)
        span = float(np.abs(d).max())
        ul = vinv[:, 0] * (-0.5j * TWO_PI * im.drive[0])
        ur = vinv[:, -1] * (-0.5j * TWO_PI * im.drive[-1])
        beta = np.zeros((times.size, d.size), complex)
        for i in range(1, times.size):
            t0, t1 = times[i - 1], times[i]
            cuts = [t0] + [b for b in bps if t0 < b < t1] + [t1]
            edges = [t0]
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                pieces = max(1, math.ceil((hi - lo) * span / _GL_PHASE))
                edges.extend(np.linspace(lo, hi, pieces + 1)[1:])
            acc = np.zeros(d.size, complex)
            for lo, hi in zip(edges[:-1], edges[1:]):
                half = 0.5 * (hi - lo)
                tq = lo + half * (_GL_X + 1)
                el, er = _envelope_samples(device, tq)
                kern = np.exp(np.multiply.outer(t1 - tq, d))  # (q, modes)
                acc += half * ((_GL_W * el) @ kern * ul + (_GL_W * er) @ kern * ur)
            beta[i] = np.exp(d * (t1 - t0)) * beta[i - 1] + acc
        amps[s] = beta @ v.T
    dt = float(times[1] - times[0]) if times.size > 1 else 0.0
    return AmplitudeTrajectory(dt, times, amps)


def spectral_solution(device: DeviceConfig, t: float, ladder=None) -> dict[str, np.ndarray]:
    """Amplitude vector per qubit state at a single time ``t``."""
    traj = spectral_trajectory(device, np.array([0.0, float(t)]), ladder=ladder)
    return {s: a[-1] for s, a in traj.amplitudes.items()}


# ---------------------------------------------------------------------------
# conditional phases
# ---------------------------------------------------------------------------

PAIRS = (("11", "00"), ("10", "00"), ("01", "00"))


@dataclass
class PhaseTrajectory:
    times: np.ndarray
    mu: dict[tuple[str, str], np.ndarray]
    theta: np.ndarray  # complex; real part is the entangling phase (rad)

    @property
    def final_phase(self) -> float:
        return float(self.theta[-1].real)


def accumulate_phase(traj: AmplitudeTrajectory, device: DeviceConfig) -> PhaseTrajectory:
    """Integrate d(mu_jk,00)/dt = -sum_p (chi~_jk - chi~_00) alpha_jk alpha_00^* (Simpson)."""
    shapes = {a.shape for a in traj.amplitudes.values()}
    if len(shapes) != 1 or set(traj.amplitudes) != set(STATES):
        raise GridMismatchError("trajectories for all four states must share one grid")
    if next(iter(shapes))[0] != traj.times.size:
        raise GridMismatchError("time grid and amplitude samples disagree")
    n = next(iter(shapes))[1]
    w = dispersive_weights(device, n)
    a00c = np.conj(traj.amplitudes["00"])
    mu = {}
    for jk, nm in PAIRS:
        rate = -TWO_PI * np.einsum("tm,m,tm->t", traj.amplitudes[jk], w[jk] - w[nm], a00c)
        if traj.times.size > 1:
            acc = cumulative_simpson(rate.real, x=traj.times) + 1j * cumulative_simpson(
                rate.imag, x=traj.times
            )
            mu[(jk, nm)] = np.concatenate(([0.0], acc))
        else:
            mu[(jk, nm)] = np.zeros(1, complex)
    theta = mu[("11", "00")] - mu[("10", "00")] - mu[("01", "00")]
    return PhaseTrajectory(traj.times, mu, theta)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------


def _pole_check(x: float, what: str) -> None:
    if abs(x) < DEGENERATE_EPS**2:
        raise DegenerateDetuningError(f"pole in {what}")


def zz_rate_closed_form(eps: float, chi: float, delta: float, g: float) -> float:
    """Steady-state Re(d theta/dt) for IQ driving, returned in MHz.

    Inputs are frequencies in GHz; ``chi`` is the dispersive-shift magnitude.
    """
    d1 = 9 * delta**2 - 18 * g**2 - 6 * delta * chi + chi**2
    d2 = 2 * delta**2 - 3 * delta * chi + chi**2
    for x in (delta, d1, d2):
        _pole_check(x, "zz_rate_closed_form")
    return 1e3 * eps**2 * chi**2 / (4 * delta) * (9 / d1 - 2 / d2)


def dephasing_rate_closed_form(eps: float, chi: float, delta: float, g: float, kappa: float) -> float:
    """Steady-state Im(d theta/dt) in MHz; linear in ``kappa``."""
    d1 = 9 * delta**2 - 18 * g**2 - 6 * delta * chi + chi**2
    d2 = delta**2 - 3 * delta * chi + chi**2
    for x in (delta, d1, d2):
        _pole_check(x, "dephasing_rate_closed_form")
    bracket = (4 * delta - 3 * chi) / (2 * d2**2) - 27 * (3 * delta - chi) / d1**2
    return 1e3 * eps**2 * chi**2 * kappa / (4 * delta) * bracket


def device_closed_form(device: DeviceConfig) -> tuple[float, float]:
    """(ZZ, dephasing) closed forms evaluated at the device's mean parameters."""
    chi = 0.5 * sum(abs(x) for x in device.dispersive_shifts())
    dl, _, dr = device.detunings()
    delta = 0.5 * (dl + dr)
    g = 0.5 * (device.coupling.g_left_center + device.coupling.g_right_center)
    eps = 0.5 * (device.left_drive.amplitude + device.right_drive.amplitude)
    kappa = 0.5 * (device.left_resonator.decay_rate + device.right_resonator.decay_rate)
    return zz_rate_closed_form(eps, chi, delta, g), dephasing_rate_closed_form(eps, chi, delta, g, kappa)


# ---------------------------------------------------------------------------
# steady-state ZZ and sweeps
# ---------------------------------------------------------------------------


@dataclass
class ZZResult:
    detuning: float  # GHz
    zz_rate_numeric: float  # MHz
    zz_rate_closed_form: float  # MHz
    dephasing_rate: float  # MHz
    residual_photons: list[float] = field(default_factory=list)
    max_mean_photon: float = 0.0
    n_crit_margin: float = 0.0
    error: str | None = None

    def to_row(self) -> dict:
        row = {
            "detuning_mhz": 1e3 * self.detuning,
            "zz_numeric_mhz": self.zz_rate_numeric,
            "zz_closed_form_mhz": self.zz_rate_closed_form,
            "dephasing_mhz": self.dephasing_rate,
            "residual_photons": float(sum(self.residual_photons)),
            "max_mean_photon": self.max_mean_photon,
            "n_crit_margin": self.n_crit_margin,
        }
        if self.error:
            row["error"] = self.error
        return row


def steady_envelope(rise: float = 100.0, hold: float = 1000.0) -> EnvelopeSpec:
    """Long flat top with nested-cosine edges for steady-state rate extraction."""
    return EnvelopeSpec("nested_cosine", rise_time=rise, hold_time=hold)


def steady_state_zz(
    device: DeviceConfig,
    dt: float = DEFAULT_DT,
    ladder=None,
    rise: float = 100.0,
    hold: float = 1000.0,
) -> ZZResult:
    """Numeric ZZ from the slope of Re(theta) over the last half of a long flat top."""
    dev = device.with_envelope(steady_envelope(rise, hold))
    traj = integrate_amplitudes(dev, dt=dt, ladder=ladder)
    ph = accumulate_phase(traj, dev)
    t = traj.times
    win = (t >= rise + 0.5 * hold) & (t <= rise + hold)
    slope_re = np.polyfit(t[win], ph.theta[win].real, 1)[0]
    slope_im = np.polyfit(t[win], ph.theta[win].imag, 1)[0]
    means = [
        float(np.mean(np.abs(a[win][:, m]) ** 2))
        for a in traj.amplitudes.values()
        for m in (0, -1)
    ]
    nmax = max(means)
    ncrit = min(device_critical_photons(device))
    zz_cf, _ = device_closed_form(dev)
    dl, _, dr = dev.detunings()
    return ZZResult(
        detuning=0.5 * (dl + dr),
        zz_rate_numeric=1e3 * slope_re / TWO_PI,
        zz_rate_closed_form=zz_cf,
        dephasing_rate=1e3 * slope_im / TWO_PI,
        residual_photons=[float(x) for x in max(traj.terminal_photons.values(), key=np.sum)],
        max_mean_photon=nmax,
        n_crit_margin=ncrit - nmax,
    )


def mean_photon_00(device: DeviceConfig, ladder=None) -> float:
    """Steady-state photons per drive resonator for |00> at unit envelope (max of the two)."""
    im = build_interaction_matrix("00", device, ladder=ladder)
    a = im.matrix
    b = -0.5j * im.drive
    alpha = np.linalg.solve(a, -b)
    return float(max(abs(alpha[0]) ** 2, abs(alpha[-1]) ** 2))


def amplitude_for_mean_photon(device: DeviceConfig, photons: float, ladder=None) -> DeviceConfig:
    """Copy of ``device`` whose drive amplitude gives ``photons`` steady |00> photons.

    The fixed point is linear in the drive, so the photon number scales with
    the amplitude squared and the inversion is exact.
    """
    if not photons > 0:
        raise ValueError("target photon number must be positive")
    n = mean_photon_00(device, ladder=ladder)
    if not n > 0:
        raise ValueError("the device drive produces no photons; set a nonzero amplitude first")
    c = math.sqrt(photons / n)
    return replace(
        device,
        left_drive=replace(device.left_drive, amplitude=device.left_drive.amplitude * c),
        right_drive=replace(device.right_drive, amplitude=device.right_drive.amplitude * c),
    )


def steady_state_amplitudes(device: DeviceConfig, ladder=None) -> dict[str, np.ndarray]:
    """Constant-drive fixed points alpha = A^-1 (i/2) E for each state."""
    out = {}
    for s, im in interaction_matrices(device, ladder).items():
        out[s] = np.linalg.solve(im.matrix, 0.5j * im.drive)
    return out


def steady_state_zz_algebraic(device: DeviceConfig, ladder=None) -> float:
    """Re(d theta/dt) in MHz from the fixed points (no transients)."""
    alpha = steady_state_amplitudes(device, ladder)
    n = next(iter(alpha.values())).size
    w = dispersive_weights(device, n)
    a00c = np.conj(alpha["00"])

    def mudot(jk):
        return -np.sum(w[jk] * alpha[jk] * a00c)

    th = mudot("11") - mudot("10") - mudot("01")
    return float(1e3 * th.real)


def operating_window(device: DeviceConfig) -> tuple[float, float]:
    """Detuning interval (GHz) used for ZZ-vs-theory comparisons.

    Lower edge: the idle state's steady photon number (eps / 2 Delta)**2 reaches
    the smaller critical photon number.  Upper edge: two thirds of the way to
    the bright dressed-mode resonance at sqrt(2) g.
    """
    eps = max(device.left_drive.amplitude, device.right_drive.amplitude)
    ncrit = min(device_critical_photons(device))
    g = 0.5 * (device.coupling.g_left_center + device.coupling.g_right_center)
    lo = eps / (2 * math.sqrt(ncrit))
    hi = (2 / 3) * math.sqrt(2) * g
    if lo >= hi:
        raise ValueError("no dispersive operating window for these parameters")
    return lo, hi


def zz_sweep(
    device: DeviceConfig,
    detunings,
    dt: float = DEFAULT_DT,
    ladder=None,
    parallel: int = 1,
    **kw,
) -> list[ZZResult]:
    """Numeric and closed-form ZZ across drive detunings (GHz).

    Failures at individual grid points are recorded in ``ZZResult.error``.
    """
    detunings = list(detunings)
    if not detunings:
        raise ValueError("detuning grid is empty")

    def one(delta):
        dev = device.with_detuning(float(delta))
        try:
            return steady_state_zz(dev, dt=dt, ladder=ladder, **kw)
        except (IntegrationError, DegenerateDetuningError, np.linalg.LinAlgError) as exc:
            return ZZResult(float(delta), math.nan, math.nan, math.nan, error=str(exc))

    return _map(one, detunings, parallel)


def _map(fn, items, parallel: int):
    if parallel <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(fn, items))


@dataclass
class AsymmetryPoint:
    phase_difference: float
    coupling_angle: float
    entangling_phase: float
    residual_photons: float


def drive_asymmetry_sweep(
    device: DeviceConfig,
    phases,
    angles,
    dt: float = DEFAULT_DT,
    ladder=None,
) -> list[AsymmetryPoint]:
    """Entangling phase and residual photons over (phase difference, coupling angle).

    The angle is atan(|g_lc| / |g_rc|); the total coupling
    sqrt(g_lc**2 + g_rc**2) is held at its device value.
    """
    c = device.coupling
    gtot = math.hypot(c.g_left_center, c.g_right_center)
    out = []
    for theta in angles:
        if not 0 < theta < math.pi / 2:
            raise ValueError("coupling angle must lie in (0, pi/2)")
        cp = replace(c, g_left_center=gtot * math.sin(theta), g_right_center=gtot * math.cos(theta))
        for phi in phases:
            dev = replace(device, coupling=cp).with_drive(phase=0.0, phase_difference=float(phi))
            traj = integrate_amplitudes(dev, dt=dt, ladder=ladder)
            ph = accumulate_phase(traj, dev)
            out.append(AsymmetryPoint(float(phi), float(theta), ph.final_phase, traj.residual_photons))
    return out


def residual_photon_map(
    device: DeviceConfig,
    gate_times,
    detunings,
    envelope: EnvelopeSpec | None = None,
    dt: float = DEFAULT_DT,
    ladder=None,
) -> np.ndarray:
    """Worst-state residual photons after pulses of each total duration and detuning.

    ``envelope`` provides the shape; its timing is rescaled to each gate time.
    """
    gate_times = list(gate_times)
    detunings = list(detunings)
    if not gate_times or not detunings:
        raise ValueError("grids must be non-empty")
    base = envelope or device.left_drive.envelope
    out = np.empty((len(gate_times), len(detunings)))
    for i, T in enumerate(gate_times):
        env = rescale_envelope(base, T)
        for j, delta in enumerate(detunings):
            dev = device.with_envelope(env).with_detuning(float(delta))
            out[i, j] = integrate_amplitudes(dev, dt=dt, ladder=ladder).residual_photons
    return out


def cz_amplitude(
    device: DeviceConfig, target: float = math.pi, dt: float = DEFAULT_DT, ladder=None
) -> DeviceConfig:
    """Scale both drive amplitudes so that Re theta(T) equals ``target``.

    The amplitudes are linear in the drive and the phase bilinear in them, so
    theta scales exactly with the square of a common amplitude factor.
    """
    traj = integrate_amplitudes(device, dt=dt, ladder=ladder)
    theta = accumulate_phase(traj, device).final_phase
    if not theta > 0 or not target > 0:
        raise ValueError("phase and target must both be positive to rescale the amplitude")
    c = math.sqrt(target / theta)
    return replace(
        device,
        left_drive=replace(device.left_drive, amplitude=device.left_drive.amplitude * c),
        right_drive=replace(device.right_drive, amplitude=device.right_drive.amplitude * c),
    )
