import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrsense.errors import DomainError
from corrsense.signal_model import (GAMMA_E_DEFAULT, AcField, DetectionModel, PhysicsConstants,
                                    PulseSequence, SequenceKind, acquired_phase_numeric,
                                    effective_theta, expected_photons, modulation_sign,
                                    population, theta_closed, theta_numeric)

from oracles import accumulated_phase_riemann

W = 2 * math.pi * 5e5
C = PhysicsConstants()


def test_default_gyromagnetic_ratio():
    assert GAMMA_E_DEFAULT == pytest.approx(2 * math.pi * 28.024e9, rel=1e-15)


def test_acfield_reduces_phase():
    f = AcField(W, 1e-6, phi0=-0.5)
    assert 0 <= f.phi0 < 2 * math.pi
    assert f.phi0 == pytest.approx(2 * math.pi - 0.5)
    assert AcField(W, 0, 7 * math.pi).phi0 == pytest.approx(math.pi)


@pytest.mark.parametrize("kw", [dict(omega=0, amplitude=1), dict(omega=W, amplitude=-1),
                                dict(omega=float("inf"), amplitude=1)])
def test_acfield_invariants(kw):
    with pytest.raises(DomainError):
        AcField(**kw)


def test_sequence_and_detection_invariants():
    with pytest.raises(DomainError):
        PulseSequence.spin_echo(0)
    with pytest.raises(DomainError):
        PulseSequence.pdd(0, 1e-6)
    with pytest.raises(DomainError):
        PulseSequence(SequenceKind.SPIN_ECHO, 1e-6, 2)
    with pytest.raises(DomainError):
        DetectionModel(0.5, 0.1)
    with pytest.raises(DomainError):
        DetectionModel(10, 0)
    with pytest.raises(DomainError):
        PhysicsConstants(-1)
    assert DetectionModel(1e6, 1e-4).lambda_max == pytest.approx(100)


def test_modulation_sign():
    se = PulseSequence.spin_echo(2e-6)
    assert modulation_sign(se, 0.5e-6) == 1
    assert modulation_sign(se, 1.5e-6) == -1
    assert modulation_sign(PulseSequence.pdd(2, 2e-6), 1.0e-6) == -1
    assert modulation_sign(PulseSequence.pdd(2, 2e-6), 1.6e-6) == 1
    with pytest.raises(DomainError):
        modulation_sign(se, 3e-6)


def test_flip_times():
    assert np.allclose(PulseSequence.pdd(2, 2e-6).flip_times(), [0.5e-6, 1.5e-6])
    assert np.allclose(PulseSequence.cp(2, 2e-6).flip_times(), [0.5e-6, 1.5e-6])
    assert np.allclose(PulseSequence.spin_echo(2e-6).flip_times(), [1e-6])


def test_zero_field_phase():
    f = AcField(W, 0.0)
    assert acquired_phase_numeric(PulseSequence.spin_echo(2e-6), f, C, 0.3) == 0.0
    assert theta_closed(PulseSequence.spin_echo(2e-6), f, C) == 0.0


def test_spin_echo_peak_phase_one_period():
    f = AcField(W, 8e-6)
    seq = PulseSequence.spin_echo(2e-6)
    theta = theta_closed(seq, f, C)
    assert theta == pytest.approx(0.448384, abs=5e-7)
    # start phase making omega*tau/2 + phi = 0
    ph = acquired_phase_numeric(seq, f, C, -math.pi)
    assert ph == pytest.approx(-4 * C.gamma_e * 8e-6 / W, rel=1e-12)
    assert ph == pytest.approx(-4 * theta, rel=1e-12)


def test_spin_echo_two_periods_gives_zero():
    f = AcField(W, 8e-6)
    seq = PulseSequence.spin_echo(4e-6)
    assert theta_closed(seq, f, C) == pytest.approx(0, abs=1e-15)
    for p in np.linspace(0, 2 * math.pi, 7):
        assert abs(acquired_phase_numeric(seq, f, C, p)) < 1e-12


def test_printed_convention_kept_for_comparison():
    f = AcField(W, 8e-6)
    seq = PulseSequence.spin_echo(2e-6)
    # sin^2(omega tau / 2) vanishes at one full period
    assert theta_closed(seq, f, C, "printed") == pytest.approx(0, abs=1e-12)
    assert effective_theta(seq, f, C, "printed") == theta_closed(seq, f, C, "printed")
    with pytest.raises(DomainError):
        theta_closed(seq, f, C, "other")


def test_quadrature_against_riemann_oracle():
    f = AcField(W, 5e-6)
    for seq in (PulseSequence.spin_echo(1.3e-6), PulseSequence.pdd(3, 2.7e-6)):
        for p in (0.0, 1.0, 4.0):
            # the oracle integrates sin, so shift the cosine reference by -pi/2
            ref = accumulated_phase_riemann(C.gamma_e, f.amplitude, W, p - math.pi / 2,
                                            seq.flip_times(), seq.tau)
            # midpoint rule misplaces each sign flip by at most one step
            tol = 2 * (seq.n + 1) * C.gamma_e * f.amplitude * seq.tau / 200000
            assert acquired_phase_numeric(seq, f, C, p) == pytest.approx(ref, abs=tol)


def test_spin_echo_closed_form_grid():
    # 20 x 20 grid of (omega*tau, phi_start): closed-form phase vs quadrature
    f = AcField(W, 20e-6)
    for wt in np.linspace(0.1, 4 * math.pi, 20):
        seq = PulseSequence.spin_echo(wt / W)
        theta = theta_closed(seq, f, C)
        for p in np.linspace(0, 2 * math.pi, 20, endpoint=False):
            closed = -4 * theta * math.cos(wt / 2 + p)
            assert abs(closed - acquired_phase_numeric(seq, f, C, p)) <= 1e-9 * max(1, 4 * theta)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_cp_closed_form_matches_oracle_for_even_n(n):
    # with flips at (2k-1)tau/(2n) the CP formula holds for even n
    f = AcField(W, 10e-6)
    for wt in (1.0, 2.5, 5.0, 9.0):
        seq = PulseSequence.cp(n, wt / W)
        assert theta_closed(seq, f, C) == pytest.approx(theta_numeric(seq, f, C), rel=1e-9, abs=1e-15)


def test_pdd_oracle_wins_where_closed_form_differs(caplog):
    f = AcField(W, 10e-6)
    seq = PulseSequence.pdd(3, 2.5 / W)
    with caplog.at_level("INFO"):
        th = effective_theta(seq, f, C)
    assert th == pytest.approx(theta_numeric(seq, f, C), rel=1e-12)
    assert th != pytest.approx(theta_closed(seq, f, C), rel=1e-3)
    assert "quadrature" in caplog.text


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 20), st.floats(0, 2 * math.pi), st.sampled_from(["se", "pdd", "cp"]),
       st.integers(1, 5))
def test_phase_linear_in_amplitude_and_periodic(wt, p, kind, n):
    seq = {"se": PulseSequence.spin_echo(wt / W), "pdd": PulseSequence.pdd(n, wt / W),
           "cp": PulseSequence.cp(n, wt / W)}[kind]
    a = acquired_phase_numeric(seq, AcField(W, 3e-6), C, p)
    b = acquired_phase_numeric(seq, AcField(W, 6e-6), C, p)
    scale = C.gamma_e * 6e-6 * seq.tau
    assert abs(b - 2 * a) <= 1e-12 * scale
    c = acquired_phase_numeric(seq, AcField(W, 3e-6), C, p + 2 * math.pi)
    assert abs(c - a) <= 1e-12 * scale


def test_theta_numeric_matches_spin_echo_closed_form():
    f = AcField(W, 8e-6)
    for tau in (0.7e-6, 2e-6, 3.1e-6):
        seq = PulseSequence.spin_echo(tau)
        assert theta_numeric(seq, f, C) == pytest.approx(theta_closed(seq, f, C), rel=1e-10)


def test_population_examples():
    assert population(3.3, math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert population(0.0, 1.234) == 1.0
    assert population(math.pi / 4, 0.0) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(-20, 20))
def test_population_bounds_and_symmetry(theta, psi):
    p = population(theta, psi)
    assert 0.0 <= p <= 1.0
    assert population(theta, -psi) == pytest.approx(p, abs=1e-12)
    assert population(theta, psi + math.pi) == pytest.approx(p, abs=1e-9)


def test_expected_photons():
    det = DetectionModel(1e6, 1e-4)
    assert expected_photons(1.0, det) == pytest.approx(100)
    assert expected_photons(0.0, det) == 0.0
    assert expected_photons(0.5, det) == pytest.approx(50)
    assert expected_photons(np.array([0.25, 1.0]), det) == pytest.approx([25, 100])
    with pytest.raises(DomainError):
        expected_photons(1.2, det)
