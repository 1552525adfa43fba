import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfhom.emitter import (
    AtomState,
    DriveParams,
    EmitterParams,
    JointPureState,
    device_figures,
    g1_magnitude_steady,
    g1_window,
    joint_state,
    m_bound_from_g1,
    p0_from_flux,
    saturation_parameter,
    saturation_weights,
    steady_state,
)
from rfhom.errors import NonZeroDephasing, ParameterError, WindowViolation
from rfhom.units import to_cyclic


def _drive(omega, delta_rad):
    return DriveParams(omega=omega, delta=to_cyclic(delta_rad))


# resonant drive with omega = gamma: textbook rho_ee = (W^2/4)/(G^2/4 + W^2/2) = 1/3
def test_steady_state_resonant_textbook():
    s = steady_state(EmitterParams(gamma_par=1.0), _drive(1.0, 0.0))
    assert s.rho_ee == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert s.rho_gg == pytest.approx(2.0 / 3.0, abs=1e-15)
    # |rho_ge| = (W/2)(G/2)/(G^2/4 + W^2/2) = 1/3 on resonance
    assert abs(s.rho_ge) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_steady_state_zero_drive_is_ground():
    s = steady_state(EmitterParams(gamma_par=2.0, gamma_star=0.3), _drive(0.0, 1.0))
    assert (s.rho_gg, s.rho_ee, s.rho_ge) == (1.0, 0.0, 0.0)


def test_strong_drive_saturates_at_half():
    s = steady_state(EmitterParams(gamma_par=1.0), _drive(1e4, 0.0))
    assert s.rho_ee == pytest.approx(0.5, abs=1e-7)


def test_coherence_sign_follows_detuning():
    # the imaginary part of rho_ge flips with the sign of the detuning
    e = EmitterParams(gamma_par=1.0)
    plus = steady_state(e, _drive(1.0, 2.0)).rho_ge
    minus = steady_state(e, _drive(1.0, -2.0)).rho_ge
    assert plus == pytest.approx(minus.conjugate(), abs=1e-15)
    assert plus.imag != 0.0


@settings(max_examples=60, deadline=None)
@given(gpar=st.floats(0.1, 10), gstar=st.floats(0, 5), omega=st.floats(0, 20),
       delta=st.floats(-20, 20))
def test_steady_state_is_physical(gpar, gstar, omega, delta):
    s = steady_state(EmitterParams(gamma_par=gpar, gamma_star=gstar), _drive(omega, delta))
    eig = np.linalg.eigvalsh(s.matrix())
    assert eig.min() >= -1e-12
    assert s.rho_gg + s.rho_ee == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= s.rho_ee <= 0.5 + 1e-12


def test_atom_state_rejects_bad_trace():
    with pytest.raises(ParameterError):
        AtomState(0.6, 0.6, 0.0)


def test_emitter_t1_consistency():
    e = EmitterParams.from_t1(0.074)
    assert e.gamma_par == pytest.approx(1 / 0.074)
    assert e.gamma_perp == pytest.approx(0.5 / 0.074)
    with pytest.raises(ParameterError):
        EmitterParams(gamma_par=10.0, t1=0.074)
    with pytest.raises(ParameterError):
        EmitterParams(gamma_par=-1.0)


def test_joint_state_closed_form():
    # gamma = 1, delta = 0.5 rad/ns, omega = 1: p0 = (1 + 1)/(1 + 1 + 2) = 1/2
    js = joint_state(EmitterParams(gamma_par=1.0), _drive(1.0, 0.5))
    assert js.p0 == pytest.approx(0.5, abs=1e-15)
    assert js.p1 == pytest.approx(0.5, abs=1e-15)
    assert js.theta == pytest.approx(math.atan(1.0) + math.pi / 2, abs=1e-15)


def test_joint_state_needs_zero_dephasing():
    with pytest.raises(NonZeroDephasing):
        joint_state(EmitterParams(gamma_par=1.0, gamma_star=0.1), _drive(1.0, 0.0))


def test_joint_pure_state_validation():
    with pytest.raises(Exception):
        JointPureState(0.7, 0.7)


@pytest.mark.parametrize("nbar,expected", [(0.0, 1.0), (0.05, 0.919997), (0.4, 0.589734)])
def test_p0_from_flux_values(nbar, expected):
    # 1/(1 + 2*0.8696*nbar) evaluated by hand
    p0, p1 = p0_from_flux(nbar, 0.8696)
    assert float(p0) == pytest.approx(expected, abs=1e-6)
    assert float(p0 + p1) == pytest.approx(1.0)


def test_p0_from_flux_vectorized_and_monotone():
    p0, _ = p0_from_flux(np.linspace(0, 2, 50))
    assert np.all(np.diff(p0) < 0)


def test_flux_drive_reproduces_p0():
    e = EmitterParams.from_t1()
    for delta in (0.0, 0.3, -1.2):
        d = DriveParams.from_flux(e, nbar=0.1, eta_ab=0.8696, delta=delta)
        assert joint_state(e, d).p0 == pytest.approx(float(p0_from_flux(0.1)[0]), rel=1e-12)


def test_saturation_weights_general_form():
    e = EmitterParams(gamma_par=1.0, gamma_star=0.5)
    d = _drive(2.0, 1.0)
    # s = gp W^2 / (g (gp^2 + D^2)), gp = 1.0
    s_hand = 1.0 * 4.0 / (1.0 * (1.0 + 1.0))
    assert saturation_parameter(e, d) == pytest.approx(s_hand)
    coh, inc, s = saturation_weights(e, d)
    assert coh == pytest.approx(1 / 3)
    assert coh + inc == pytest.approx(1.0)


def test_saturation_reduces_without_dephasing():
    e = EmitterParams(gamma_par=1.3)
    d = _drive(0.7, 0.4)
    s = saturation_parameter(e, d)
    assert s == pytest.approx(2 * 0.49 / (1.69 + 4 * 0.16), rel=1e-14)
    assert 1 / (1 + s) == pytest.approx(joint_state(e, d).p0, rel=1e-14)


def test_g1_steady_dephasing_lowers_coherence():
    d = _drive(1.0, 0.2)
    clean = g1_magnitude_steady(EmitterParams(gamma_par=1.0), d)
    noisy = g1_magnitude_steady(EmitterParams(gamma_par=1.0, gamma_star=0.5), d)
    assert noisy < clean


def test_g1_window_and_warning():
    js = JointPureState(0.9, 0.1)
    e = EmitterParams.from_t1()
    assert g1_window(js, 5.0, emitter=e) == pytest.approx(0.9)
    with pytest.warns(WindowViolation):
        g1_window(js, 0.1, emitter=e)
    with pytest.warns(WindowViolation):
        g1_window(js, 50.0, emitter=e, drive=DriveParams())


@pytest.mark.parametrize("g1,nbar,expected", [
    (0.991, 0.002, 0.98995),  # 0.991^2 * 1.004^2
    (1.0, 0.0, 1.0),
    (0.5, 0.0, 0.25),
    (1.0, 0.5, 1.0),  # clamped
])
def test_m_bound(g1, nbar, expected):
    assert m_bound_from_g1(g1, nbar) == pytest.approx(expected, abs=5e-6)


def test_device_figures():
    lw, coop, fp = device_figures(EmitterParams.from_t1(0.074))
    assert lw == pytest.approx(1 / (2 * math.pi * 0.074), rel=1e-12)
    assert lw == pytest.approx(2.15, abs=0.01)
    assert coop == pytest.approx(6.2**2 / (35 * 0.2015), rel=1e-12)
    assert fp == pytest.approx(2 * coop)


def test_device_figures_zero_bulk_rate():
    with pytest.raises(ParameterError):
        device_figures(EmitterParams(gamma_par=1.0, gamma_bulk=0.0))


def test_no_warning_inside_window():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        g1_window(JointPureState(0.5, 0.5), 2.0, emitter=EmitterParams.from_t1(), drive=DriveParams())
