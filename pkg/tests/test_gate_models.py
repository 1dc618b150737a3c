import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import jv

from app.models import TWO_PI, PhysParams, PulseEnvelope
from app.services.evolution import gate_envelope
from app.services.hilbert import build_space
from app.services.gate_models import (
    GATE_PHASE,
    SWGateModel,
    SWSidebandModel,
    TWGateModel,
    geometric_phase_per_force,
    get_gate_model,
    required_force,
)

ETA = 0.051
OMEGA_Z = TWO_PI * 1.2e6


@pytest.fixture
def params():
    return PhysParams(eta=ETA, omega_z=OMEGA_Z)


@pytest.mark.parametrize(
    "name, cls",
    [("sw_ms", SWGateModel), ("TW_MS", TWGateModel), ("sw_ms_sideband", SWSidebandModel)],
)
def test_factory_returns_model(name, cls):
    assert isinstance(get_gate_model(name), cls)


def test_factory_rejects_unknown_scheme():
    with pytest.raises(ValueError, match="Unsupported gate model"):
        get_gate_model("light_shift")


def test_gate_params_set_two_ions_and_detuning(params):
    delta_g = TWO_PI / 20e-6
    p = get_gate_model("sw_ms").gate_params(params, delta_g, 1e6)
    assert p.n_ions == 2
    assert p.delta == pytest.approx(OMEGA_Z + delta_g)
    assert p.omega_rabi == 1e6


def test_force_normalization(params):
    p = params.model_copy(update={"omega_rabi": 1e6})
    assert get_gate_model("sw_ms").sdf_scale(p) == pytest.approx(2 * ETA * 1e6)
    assert get_gate_model("tw_ms").sdf_scale(p) == pytest.approx(ETA * 1e6)
    assert get_gate_model("sw_ms").force_phase(p) == pytest.approx(p.tilde_phi)


@pytest.mark.parametrize("t_gate", [15e-6, 30e-6, 60e-6])
def test_square_pulse_phase_integral(t_gate):
    delta_g = TWO_PI / t_gate
    env = gate_envelope(delta_g, 0.0, "square")
    assert geometric_phase_per_force(delta_g, env) == pytest.approx(TWO_PI / delta_g ** 2, rel=1e-6)
    assert required_force(delta_g, env) == pytest.approx(delta_g / 4, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(ramp=st.floats(min_value=0.5e-6, max_value=10e-6, allow_nan=False))
def test_ramped_pulse_phase_stays_positive(ramp):
    delta_g = TWO_PI / 20e-6
    env = gate_envelope(delta_g, ramp)
    phase = geometric_phase_per_force(delta_g, env)
    assert phase > 0
    assert required_force(delta_g, env) ** 2 * phase == pytest.approx(GATE_PHASE)


def test_phase_requires_positive_detuning():
    with pytest.raises(ValueError):
        geometric_phase_per_force(0.0, PulseEnvelope(t_total=1e-5))


def test_standing_wave_operating_point(params):
    delta_g = TWO_PI / 20e-6
    env = gate_envelope(delta_g, 0.0, "square")
    assert get_gate_model("sw_ms").predicted_rabi(params, delta_g, env) == pytest.approx(delta_g / (4 * ETA), rel=1e-6)


@pytest.mark.parametrize("t_gate", [15e-6, 20e-6, 60e-6])
def test_traveling_wave_operating_point_solves_bessel_law(params, t_gate):
    delta_g = TWO_PI / t_gate
    env = gate_envelope(delta_g, 0.0, "square")
    delta = OMEGA_Z + delta_g
    omega_tw = get_gate_model("tw_ms").predicted_rabi(params, delta_g, env)
    omega_sw = get_gate_model("sw_ms").predicted_rabi(params, delta_g, env)
    assert ETA * delta * jv(1, 2 * omega_tw / delta) == pytest.approx(delta_g / 2, rel=1e-9)
    # J1(x) < x/2 so the traveling wave always needs more than twice the standing-wave drive
    assert omega_tw > 2 * omega_sw


def test_traveling_wave_beyond_speed_limit_is_nan(params, caplog):
    delta_g = TWO_PI / 10e-6
    env = gate_envelope(delta_g, 0.0, "square")
    with caplog.at_level(logging.WARNING):
        omega = get_gate_model("tw_ms").predicted_rabi(params, delta_g, env)
    assert math.isnan(omega)
    assert "traveling-wave limit" in caplog.text


def test_sideband_model_has_no_carrier_terms(params):
    space = build_space(2, 3)
    p = get_gate_model("sw_ms_sideband").gate_params(params, TWO_PI / 20e-6, 1e6)
    full = get_gate_model("sw_ms").hamiltonian(p, space)
    sideband = get_gate_model("sw_ms_sideband").hamiltonian(p, space)
    # only the force on X survives, so the motional diagonal vanishes
    diag_blocks = sideband.matrix(0.0).reshape(4, 4, 4, 4)
    assert np.all(np.abs(np.einsum("injn->ij", diag_blocks)) < 1e-12)
    assert full.label.startswith("sw_exact")
