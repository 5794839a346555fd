import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ripzz.device import (
    ConfigError,
    DegenerateDetuningError,
    DriveSpec,
    LongResonatorSpec,
    QubitSpec,
    ResonatorSpec,
    critical_photon,
    device_critical_photons,
    dispersive_shift,
    dispersive_shift_state,
    dressed_qubit_frequency,
    effective_xx_coupling,
    static_couplings,
    static_couplings_from,
    validate_regime,
)
from ripzz.pulses import EnvelopeSpec
from ripzz.quantum import dispersive_shift_from_spectrum


def test_dressed_qubit_frequency_row1(row1):
    # 5.000 + 0.39**2 / (5.000 - 6.9239), by hand
    got = dressed_qubit_frequency(row1.left_qubit, row1.left_resonator, row1.coupling.g_left_qubit)
    assert got == pytest.approx(5.0 + 0.1521 / -1.9239, rel=1e-12)
    assert got == pytest.approx(4.92094, abs=1e-5)


def test_dispersive_shifts_row1(row1):
    chi_l, chi_r = row1.dispersive_shifts()
    assert chi_l < 0 and chi_r < 0
    assert abs(chi_l) * 1e3 == pytest.approx(20.0883, abs=1e-3)
    assert abs(chi_r) * 1e3 == pytest.approx(20.2192, abs=1e-3)


def test_dispersive_shift_by_hand():
    q = QubitSpec(5.0, -0.25, "left")
    p = ResonatorSpec(6.0, 0.0, "left_drive")
    g = 0.1
    # chi_1 - chi_0 with chi_n = g^2 (eta - omega + nu) / ((omega + n eta - nu)(omega + (n-1) eta - nu))
    chi0 = g**2 * (-0.25 + 1.0) / ((-1.0) * (-0.75))
    chi1 = g**2 * (-0.25 + 1.0) / ((-1.25) * (-1.0))
    assert dispersive_shift_state(0, q, p, g) == pytest.approx(chi0)
    assert dispersive_shift_state(1, q, p, g) == pytest.approx(chi1)
    assert dispersive_shift(q, p, g) == pytest.approx(chi1 - chi0)
    assert dispersive_shift_state(1, q, p, 2 * g) == pytest.approx(4 * chi1)


def test_harmonic_limit_has_no_shift():
    q = QubitSpec(5.0, -1e-13, "left")
    p = ResonatorSpec(6.9, 0.0, "left_drive")
    assert dispersive_shift_state(0, q, p, 0.1) == pytest.approx(-0.01 / (5.0 - 6.9))
    assert abs(dispersive_shift(q, p, 0.1)) < 1e-12


def test_dispersive_shift_matches_spectrum_at_weak_coupling():
    q = QubitSpec(5.0, -0.28, "left")
    p = ResonatorSpec(6.9, 0.0, "left_drive")
    g = 0.03
    exact = dispersive_shift_from_spectrum(q, p, g, qubit_levels=4, resonator_levels=4)
    assert exact == pytest.approx(dispersive_shift(q, p, g), rel=1e-2)


@settings(max_examples=30, deadline=None)
@given(g=st.floats(0.01, 0.5), w=st.floats(4.0, 6.0), nu=st.floats(6.5, 8.0))
def test_chi_even_in_g(g, w, nu):
    q = QubitSpec(w, -0.3, "left")
    p = ResonatorSpec(nu, 0.0, "left_drive")
    assert dispersive_shift(q, p, g) == dispersive_shift(q, p, -g)


def test_degenerate_detuning_raises():
    q = QubitSpec(6.0, -0.3, "left")
    p = ResonatorSpec(6.0, 0.0, "left_drive")
    with pytest.raises(DegenerateDetuningError):
        dispersive_shift(q, p, 0.1)
    with pytest.raises(DegenerateDetuningError):
        dressed_qubit_frequency(q, p, 0.1)


def test_critical_photon_row1(row1):
    nl, nr = device_critical_photons(row1)
    assert nl == pytest.approx(((-1.9239 - 0.28) ** 2 / (4 * 0.39**2) - 1) / 3, rel=1e-12)
    assert nl == pytest.approx(2.3278, abs=1e-4)
    assert nr == pytest.approx(2.28, abs=1e-4)
    with pytest.raises(ValueError):
        critical_photon(-1.0, -0.2, 0.0)


def test_static_couplings_by_hand():
    s = static_couplings_from(0.1, 0.05, -2.0)
    assert s.j_xx == pytest.approx(0.01 * 0.0025 / -8.0)
    assert s.xi_zz == pytest.approx(12 * s.j_xx**2 / -2.0)
    assert not s.approximate


def test_static_couplings_flags_asymmetry(row1):
    assert static_couplings(row1).approximate


def test_effective_xx_parity_sign(anchor):
    # symmetric device: the right-side exchange differs from the left only by (-1)**k
    for k in (3, 4, 5, 6):
        left = effective_xx_coupling(k, anchor, "left")
        right = effective_xx_coupling(k, anchor, "right")
        assert right == pytest.approx((-1) ** k * left, rel=1e-12)
    with pytest.raises(ValueError):
        effective_xx_coupling(4, anchor, "middle")


def test_validate_regime_grades(row1):
    rep = validate_regime(row1)
    assert rep.ok
    assert {c.status for c in rep.checks} == {"warn"}
    assert rep.multimode_ratio == pytest.approx(14.0)
    assert validate_regime(row1, ratio=3.0).checks[0].status == "pass"
    assert not validate_regime(row1, ratio=6.0, fail_ratio=4.5).ok


@pytest.mark.parametrize(
    "build",
    [
        lambda: QubitSpec(5.0, 0.2, "left"),
        lambda: QubitSpec(0.1, -0.2, "left"),
        lambda: QubitSpec(5.0, -0.2, "middle"),
        lambda: ResonatorSpec(6.0, -1.0, "center"),
        lambda: LongResonatorSpec(0.0, 3),
        lambda: LongResonatorSpec(0.2, 3, mode_count=0),
        lambda: DriveSpec(6.0, 0.0, -0.1, EnvelopeSpec(), "left_drive"),
        lambda: DriveSpec(6.0, 2 * math.pi, 0.1, EnvelopeSpec(), "left_drive"),
    ],
)
def test_spec_validation(build):
    with pytest.raises(ConfigError):
        build()


def test_parity_sign():
    assert LongResonatorSpec(0.2, 30).parity_sign == 1
    assert LongResonatorSpec(1.4, 5).parity_sign == -1
