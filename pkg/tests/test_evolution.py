import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from app.exceptions import ConvergenceError, TruncationError
from app.models import TWO_PI, IntegratorConfig, PhysParams, PulseEnvelope
from app.services.evolution import (
    convergence_ratio,
    envelope,
    envelope_values,
    evolve,
    gate_envelope,
    propagator,
)
from app.services.hamiltonians import TimedOperator, h_sw_ms, h_tw
from app.services.hilbert import basis_state, build_space, top_fock_population

OMEGA_Z = TWO_PI * 1.2e6
OMEGA = TWO_PI * 100e3


@pytest.fixture
def flat_carrier():
    """Single ion driven on the carrier with a vanishing gradient."""
    space = build_space(1, 2)
    params = PhysParams(eta=1e-9, omega_z=OMEGA_Z, omega_rabi=OMEGA)
    return h_tw(params, space, detuning=0.0, phi1=0.0)


def test_square_envelope_is_flat():
    env = PulseEnvelope(t_ramp=0.0, t_total=5e-6, shape="square")
    np.testing.assert_array_equal(envelope_values(np.linspace(0, 5e-6, 11), env), np.ones(11))


def test_ramp_shape_landmarks():
    env = PulseEnvelope(t_ramp=2e-6, t_total=10e-6)
    assert envelope(0.0, env) == 0.0
    assert envelope(1e-6, env) == pytest.approx(0.5)
    assert envelope(2e-6, env) == pytest.approx(1.0)
    assert envelope(5e-6, env) == 1.0
    assert envelope(10e-6, env) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("t", [-1e-9, 10.1e-6])
def test_envelope_outside_pulse_raises(t):
    with pytest.raises(ValueError):
        envelope(t, PulseEnvelope(t_ramp=2e-6, t_total=10e-6))


@settings(max_examples=50, deadline=None)
@given(
    fraction=st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    ramp=st.floats(min_value=1e-7, max_value=5e-6, allow_nan=False),
)
def test_envelope_bounded_and_symmetric(fraction, ramp):
    env = PulseEnvelope(t_ramp=ramp, t_total=10e-6)
    t = fraction * env.t_total
    g = envelope(t, env)
    assert 0.0 <= g <= 1.0
    assert g == pytest.approx(envelope(env.t_total - t, env), abs=1e-12)


def test_ramps_longer_than_pulse_rejected():
    with pytest.raises(ValidationError):
        PulseEnvelope(t_ramp=6e-6, t_total=10e-6)


def test_gate_envelope_durations():
    delta_g = TWO_PI / 20e-6
    shaped = gate_envelope(delta_g, 10e-6)
    assert shaped.t_total == pytest.approx(30e-6)
    square = gate_envelope(delta_g, 10e-6, "square")
    assert square.t_ramp == 0.0
    assert square.t_total == pytest.approx(20e-6)
    with pytest.raises(ValueError):
        gate_envelope(0.0, 1e-6)


def test_carrier_pi_pulse_transfers_population(flat_carrier):
    env = PulseEnvelope(t_ramp=0.0, t_total=math.pi / OMEGA, shape="square")
    psi = evolve(flat_carrier, env, basis_state(flat_carrier.space, [0]))
    assert psi.populations()[1, 0] == pytest.approx(1.0, abs=1e-8)


def test_ramped_pulse_area_sets_rotation(flat_carrier):
    t_ramp = 2e-6
    # the sin^2 ramps contribute half their length to the pulse area
    env = PulseEnvelope(t_ramp=t_ramp, t_total=math.pi / OMEGA + t_ramp)
    psi = evolve(flat_carrier, env, basis_state(flat_carrier.space, [0]))
    assert psi.populations()[1, 0] == pytest.approx(1.0, abs=1e-8)


def test_partial_propagator_is_half_rotation(flat_carrier):
    env = PulseEnvelope(t_ramp=0.0, t_total=math.pi / OMEGA, shape="square")
    half = propagator(flat_carrier, env, t_start=0.0, t_stop=0.5 * env.t_total)
    assert abs(half.entries[flat_carrier.space.n_fock, 0]) ** 2 == pytest.approx(0.5, abs=1e-8)
    full = propagator(flat_carrier, env)
    assert abs(full.entries[flat_carrier.space.n_fock, 0]) == pytest.approx(1.0, abs=1e-8)


def test_gate_propagator_is_unitary():
    space = build_space(1, 8)
    params = PhysParams(omega_rabi=TWO_PI * 50e3, delta=OMEGA_Z + TWO_PI / 20e-6, phi1=0.4)
    u = propagator(h_sw_ms(params, space, "exact"), PulseEnvelope(t_ramp=0.5e-6, t_total=2e-6))
    defect = np.max(np.abs(u.entries.conj().T @ u.entries - np.eye(space.dim)))
    assert defect < 1e-9


def test_propagator_composes_over_adjacent_intervals():
    space = build_space(1, 8)
    params = PhysParams(omega_rabi=TWO_PI * 50e3, delta=OMEGA_Z + TWO_PI / 20e-6, phi1=0.4)
    h = h_sw_ms(params, space, "exact")
    env = PulseEnvelope(t_ramp=0.0, t_total=2e-6, shape="square")
    # one accepted halving from t_total/8 puts both halves on the same step grid as the whole
    cfg = IntegratorConfig(dt_init=env.t_total / 8, tol=1.0, max_refinements=0)
    whole = propagator(h, env, cfg).entries
    first = propagator(h, env, cfg, t_stop=0.5 * env.t_total).entries
    second = propagator(h, env, cfg, t_start=0.5 * env.t_total).entries
    assert np.max(np.abs(whole - second @ first)) < 1e-8


def test_propagator_determinant_has_unit_modulus():
    space = build_space(1, 8)
    params = PhysParams(omega_rabi=TWO_PI * 50e3, delta=OMEGA_Z + TWO_PI / 20e-6, phi1=0.4)
    u = propagator(h_sw_ms(params, space, "exact"), PulseEnvelope(t_ramp=0.0, t_total=2e-6, shape="square"))
    assert abs(np.linalg.det(u.entries)) == pytest.approx(1.0, abs=1e-9)


def test_step_halving_is_second_order():
    space = build_space(1, 3)
    params = PhysParams(eta=0.051, omega_z=OMEGA_Z, omega_rabi=TWO_PI * 200e3)
    h = h_tw(params, space, detuning=OMEGA_Z)
    env = PulseEnvelope(t_ramp=0.0, t_total=2e-6, shape="square")
    ratio, err_dt, err_half = convergence_ratio(h, env, basis_state(space, [0]), 5e-9)
    assert 3.0 <= ratio <= 5.0
    assert err_half < err_dt


def test_unconverged_step_raises():
    space = build_space(1, 3)
    params = PhysParams(eta=0.051, omega_z=OMEGA_Z, omega_rabi=TWO_PI * 200e3)
    h = h_tw(params, space, detuning=OMEGA_Z)
    env = PulseEnvelope(t_ramp=0.0, t_total=2e-6, shape="square")
    cfg = IntegratorConfig(dt_init=5e-7, tol=1e-12, max_refinements=0)
    with pytest.raises(ConvergenceError) as info:
        evolve(h, env, basis_state(space, [0]), cfg)
    assert info.value.change > 1e-12


def _resonant_force(cutoff):
    # sideband-resonant standing-wave force: displacement grows as eta Omega t
    params = PhysParams(eta=0.051, omega_z=OMEGA_Z, omega_rabi=TWO_PI * 500e3, delta=OMEGA_Z)
    return h_sw_ms(params, build_space(1, cutoff))


@pytest.mark.slow
def test_fock_cutoff_grows_with_displacement():
    h = _resonant_force(2)
    eta_omega = 0.051 * TWO_PI * 500e3
    env = PulseEnvelope(t_ramp=0.0, t_total=1.5 / eta_omega, shape="square")
    psi = evolve(h, env, basis_state(h.space, [0]))
    assert psi.space.fock_cutoff > 2
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0, abs=1e-10)
    assert top_fock_population(psi.space, psi.amplitudes) < 1e-8
    mean_n = float(np.sum(psi.populations() * np.arange(psi.space.n_fock)))
    assert mean_n == pytest.approx(1.5 ** 2, rel=0.05)


def test_truncation_without_builder_raises():
    h = _resonant_force(2)
    frozen = TimedOperator(h.space, h.omega_z, h.terms, h.rate_scale)
    env = PulseEnvelope(t_ramp=0.0, t_total=5e-6, shape="square")
    with pytest.raises(TruncationError):
        evolve(frozen, env, basis_state(h.space, [0]))


def test_space_mismatch_rejected(flat_carrier):
    env = PulseEnvelope(t_ramp=0.0, t_total=1e-6, shape="square")
    with pytest.raises(ValueError):
        evolve(flat_carrier, env, basis_state(build_space(1, 3), [0]))
