import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrbin.drives import (
    CoherentParams,
    DriveStage,
    KerrParams,
    TwoToneParams,
    coherent_hamiltonian,
    h_coherent,
    h_effective_logical_x,
    h_static,
    h_two_tone,
    resonance_check,
    two_tone_hamiltonian,
)
from kerrbin.errors import InvalidCutoffError


def test_static_spectrum(kp):
    e = np.diag(h_static(kp, 16).matrix).real
    np.testing.assert_allclose(e[:5], [0, -18, -24, -18, 0])
    assert e[0] == e[4]


def test_resonance_gaps(kp):
    assert resonance_check(kp, (0, 4)) == 0
    assert resonance_check(kp, (2, 3)) == pytest.approx(kp.chi)
    assert resonance_check(kp, (2, 1)) == pytest.approx(kp.chi)
    with pytest.raises(InvalidCutoffError):
        resonance_check(kp, (0, 20), 16)


def test_detuning_default():
    assert KerrParams(3.0).detuning_delta == -12.0
    assert KerrParams(3.0, 1.5).detuning_delta == 1.5


def test_two_tone_matched():
    tp = TwoToneParams.matched(0.01, KerrParams(6.0))
    assert tp.p1 == pytest.approx(math.sqrt(6) * 0.01)
    assert tp.omega == -24.0
    assert tp.is_matched()
    assert not TwoToneParams.matched(0.01, KerrParams(6.0), 0.8).is_matched()


def test_two_tone_zero_drive_is_static(kp):
    h = h_two_tone(kp, TwoToneParams(0.0, 0.0, -24.0), 0.7, 16)
    np.testing.assert_array_equal(h.matrix, h_static(kp, 16).matrix)


def test_two_tone_elements(kp):
    p1, p2 = 0.3, 0.1
    h = h_two_tone(kp, TwoToneParams(p1, p2, -24.0), 0.0, 8).matrix
    # at t=0 both tones add on the a^2 entries: <0|a^2|2> = sqrt(2)
    assert h[0, 2] == pytest.approx((p1 + p2) * math.sqrt(2))
    # a† entries stay zero: single-photon terms absent
    assert h[0, 1] == 0


def test_coherent_elements(kp):
    h = h_coherent(kp, CoherentParams(0.2, 1), 0.0, 8).matrix
    assert h[2, 3] == pytest.approx(0.2 * math.sqrt(3))
    assert h[3, 2] == pytest.approx(0.2 * math.sqrt(3))


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(-50, 50))
def test_two_tone_hermitian_and_periodic(p1, p2, t):
    kp = KerrParams(6.0)
    h = two_tone_hamiltonian(kp, TwoToneParams(p1, p2, -4 * kp.chi), 12)
    m = h(t).matrix
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
    if not h.is_static:
        np.testing.assert_allclose(h(t + h.period()).matrix, m, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.001, 0.5), st.sampled_from([1, -1]), st.floats(-50, 50))
def test_coherent_hermitian_and_periodic(lam, sign, t):
    kp = KerrParams(6.0)
    h = coherent_hamiltonian(kp, CoherentParams(lam, sign), 12)
    m = h(t).matrix
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
    assert h.period() == pytest.approx(2 * math.pi / 6.0)
    np.testing.assert_allclose(h(t + h.period()).matrix, m, atol=1e-9)


def test_effective_model_time_average(kp):
    # averaging the two-tone drive over a period in the static frame leaves the
    # resonant 0<->2<->4 couplings; for matched p1 their |0_L>-|1_L> element is sqrt(24) p2
    p2, n = 0.01, 12
    h = two_tone_hamiltonian(kp, TwoToneParams.matched(p2, kp), n)
    e = np.diag(h.static.matrix).real
    ts = np.linspace(0, h.period(), 4001)[:-1]
    acc = np.zeros((n, n), dtype=complex)
    for t in ts:
        u = np.exp(1j * e * t)
        acc += (u[:, None] * (h(t).matrix - h.static.matrix) * u.conj()[None, :])
    avg = acc / len(ts)
    zero_l = np.zeros(n)
    zero_l[[0, 4]] = 1 / math.sqrt(2)
    one_l = np.zeros(n)
    one_l[2] = 1
    eff = h_effective_logical_x(p2, n).matrix
    assert abs(zero_l @ avg @ one_l) == pytest.approx(abs(zero_l @ eff @ one_l), rel=1e-6)
    assert abs(zero_l @ eff @ one_l) == pytest.approx(math.sqrt(24) * p2)


def test_drive_stage_validation():
    with pytest.raises(ValueError):
        DriveStage("laser", 1.0)
    with pytest.raises(ValueError):
        DriveStage("static_phase", -1.0)
    with pytest.raises(TypeError):
        DriveStage("two_tone", 1.0, CoherentParams(0.1))
    with pytest.raises(ValueError):
        DriveStage("coherent_12", 1.0, CoherentParams(0.1, 1))
    with pytest.raises(ValueError):
        CoherentParams(-0.1)
