"""Drive envelope families and their sampling.

Every envelope is normalised so that a unit peak corresponds to the drive's
``amplitude``.  Times are in ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

VARIANTS = ("polynomial", "nested_cosine", "cosine_platform", "slepian", "flat")

#: Slepian coefficients reported for the optimised 100 ns pulse at FSR = 0.2 GHz.
REFERENCE_SLEPIAN = (0.9429, -0.089, -0.003, 0.0002, -0.0003, -0.0364, 0.0835)


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class EnvelopeSpec:
    """Parametric envelope.

    ``rise_time`` is t_r.  The full pulse lasts ``2 * rise_time + hold_time``;
    for ``cosine_platform`` the hold is ``platform_ratio * rise_time``.
    """

    variant: str = "polynomial"
    rise_time: float = 50.0
    hold_time: float = 0.0
    degree: int = 3
    platform_ratio: float = 0.2
    coefficients: tuple[float, ...] = field(default=REFERENCE_SLEPIAN)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise EnvelopeError(f"unknown envelope variant {self.variant!r}")
        if not self.rise_time > 0:
            raise EnvelopeError("rise_time must be positive")
        if self.hold_time < 0:
            raise EnvelopeError("hold_time must be non-negative")
        if self.variant == "polynomial" and (self.degree < 1 or self.degree % 2 == 0):
            raise EnvelopeError("polynomial degree must be odd and >= 1")
        if self.variant == "slepian":
            lam = np.asarray(self.coefficients, dtype=float)
            if lam.size == 0 or not np.all(np.isfinite(lam)):
                raise EnvelopeError("slepian coefficients must be finite and non-empty")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def plateau(self) -> float:
        if self.variant == "cosine_platform":
            return self.platform_ratio * self.rise_time
        if self.variant == "slepian":
            return 0.0
        return self.hold_time

    @property
    def duration(self) -> float:
        return 2 * self.rise_time + self.plateau

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "rise_time": self.rise_time,
            "hold_time": self.hold_time,
            "degree": self.degree,
            "platform_ratio": self.platform_ratio,
            "coefficients": list(self.coefficients),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvelopeSpec":
        d = dict(d)
        if "coefficients" in d:
            d["coefficients"] = tuple(d["coefficients"])
        return cls(**d)

    @classmethod
    def for_gate(cls, variant: str, gate_time: float, **kw) -> "EnvelopeSpec":
        """Envelope whose total duration equals ``gate_time``."""
        hold = kw.pop("hold_time", 0.0)
        if variant == "cosine_platform":
            r = kw.get("platform_ratio", 0.2)
            return cls(variant, rise_time=gate_time / (2 + r), **kw)
        return cls(variant, rise_time=(gate_time - hold) / 2, hold_time=hold, **kw)


@lru_cache(maxsize=None)
def _poly_coeffs(d: int) -> tuple[float, ...]:
    k = (d + 1) // 2
    a = np.empty((k, k))
    for j in range(k):
        for m in range(k):
            # j-th derivative of x**(k+m) at x = 1
            a[j, m] = (-1) ** m * math.perm(k + m, j)
    rhs = np.zeros(k)
    rhs[0] = 1.0
    try:
        c = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - not reachable for valid d
        raise EnvelopeError(f"singular coefficient system for d={d}") from exc
    return tuple(float(x) for x in c)


def polynomial_coefficients(d: int) -> np.ndarray:
    """Coefficients c_m of the rise sum_m (-1)**m c_m x**(m + (d+1)/2).

    They are fixed by eps(1) = 1 and vanishing derivatives of order 1..(d-1)/2
    at x = 1, giving the smoothstep family (d=3: 3x^2 - 2x^3).
    """
    if d < 1 or d % 2 == 0 or d > 15:
        raise EnvelopeError("d must be odd with 1 <= d <= 15")
    return np.array(_poly_coeffs(d))


def _poly_rise(x: np.ndarray, d: int) -> np.ndarray:
    c = _poly_coeffs(d)
    k = (d + 1) // 2
    out = np.zeros_like(x)
    for m, cm in enumerate(c):
        out += (-1) ** m * cm * x ** (k + m)
    return out


def _nested_cos_rise(x: np.ndarray) -> np.ndarray:
    # x = t / t_r on [0, 1]
    return 0.5 * (1 + np.cos(np.pi * np.cos(0.5 * np.pi * x)))


def evaluate_envelope(spec: EnvelopeSpec, t) -> np.ndarray | float:
    """Envelope value at time(s) ``t`` in [0, spec.duration]."""
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    T = spec.duration
    tol = 1e-9 * max(T, 1.0)
    if np.any(t < -tol) or np.any(t > T + tol):
        raise EnvelopeError(f"t outside [0, {T}]")
    t = np.clip(t, 0.0, T)
    tr, tp = spec.rise_time, spec.plateau

    if spec.variant == "flat":
        out = np.ones_like(t)
    elif spec.variant == "slepian":
        lam = np.asarray(spec.coefficients)
        j = np.arange(lam.size)
        basis = 0.5 * (1 - np.cos(np.pi * np.multiply.outer(t, j + 1) / tr))
        out = basis @ lam
    else:
        # mirrored rise with optional hold
        u = np.minimum(t, T - t)
        x = np.clip(u / tr, 0.0, 1.0)
        if spec.variant == "polynomial":
            out = _poly_rise(x, spec.degree)
        else:
            out = _nested_cos_rise(x)
        out = np.where((t >= tr) & (t <= tr + tp), 1.0, out)
    return float(out) if scalar else out


def slepian_constraint_residual(lam) -> float:
    """sum of the odd-indexed (0-based) coefficients minus one."""
    lam = np.asarray(lam, dtype=float)
    return float(lam[1::2].sum() - 1.0)


def project_slepian(lam) -> np.ndarray:
    """Shift the odd-indexed coefficients equally so the constraint holds exactly."""
    lam = np.array(lam, dtype=float)
    n_odd = lam[1::2].size
    if n_odd == 0:
        raise EnvelopeError("need at least two coefficients to project")
    lam[1::2] -= slepian_constraint_residual(lam) / n_odd
    return lam


@dataclass(frozen=True)
class SampledEnvelope:
    dt: float
    samples: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)


def sample_envelope(spec: EnvelopeSpec, dt: float) -> SampledEnvelope:
    """Sample on t = 0, dt, ..., covering the full pulse.

    The duration must be an integer multiple of ``dt`` (to 1e-9 relative).
    """
    n = spec.duration / dt
    steps = int(round(n))
    if steps < 1 or abs(n - steps) > 1e-9 * max(n, 1):
        raise EnvelopeError(f"duration {spec.duration} ns is not a multiple of dt={dt}")
    t = dt * np.arange(steps + 1)
    return SampledEnvelope(dt, np.asarray(evaluate_envelope(spec, t)))


def rescale_envelope(env: EnvelopeSpec, gate_time: float) -> EnvelopeSpec:
    """Same family and proportions, total duration ``gate_time``."""
    if not gate_time > 0:
        raise EnvelopeError("gate_time must be positive")
    scale = gate_time / env.duration
    return replace(env, rise_time=env.rise_time * scale, hold_time=env.hold_time * scale)
