import math

import numpy as np
import pytest

from app.models import IntegratorConfig, PhysParams, ScanResult, TWO_PI
from app.services.calibration import (
    SPACING_SERIES,
    add_projection_noise,
    calibrate_tones,
    fit_fringe_shift,
    spacing_fit,
    spacing_model,
    tone_scan,
)
from app.services.gates import phase_scan


def two_ion_scan(dphi_sp, points=73):
    axis = np.linspace(-math.pi, math.pi, points)
    model = spacing_model(axis, dphi_sp)
    return ScanResult(
        axis_name="dphi_rad",
        axis_values=axis.tolist(),
        series={name: model[i].tolist() for i, name in enumerate(SPACING_SERIES)},
        probability_series=list(SPACING_SERIES),
    )


def fringe(shift=0.0):
    axis = np.linspace(0.0, TWO_PI, 72, endpoint=False)
    phase = axis + shift
    p = 0.5 + 0.4 * np.cos(phase) + 0.1 * np.sin(2 * phase)
    return ScanResult(axis_name="dphi_rad", axis_values=axis.tolist(), series={"p_flip": p.tolist()},
                      probability_series=["p_flip"])


def test_spacing_model_is_normalized():
    dphi = np.linspace(-math.pi, math.pi, 41)
    model = spacing_model(dphi, 0.4)
    assert np.allclose(model.sum(axis=0), 1.0)
    assert spacing_model(np.array([math.pi]), 0.0)[2, 0] == pytest.approx(1.0)


def test_spacing_fit_recovers_mismatch():
    assert spacing_fit(two_ion_scan(0.2)) == pytest.approx(0.2, abs=1e-6)


def noisy_fit_errors(scan, injected, seeds=20, shots=100):
    return np.array([
        spacing_fit(add_projection_noise(scan, shots, np.random.default_rng(seed))) - injected for seed in range(seeds)
    ])


def test_spacing_fit_with_projection_noise():
    errors = noisy_fit_errors(two_ion_scan(0.2), 0.2)
    assert np.sqrt(np.mean(errors ** 2)) < 0.033
    assert np.median(np.abs(errors)) < 0.033


def test_spacing_fit_needs_two_ion_series():
    scan = fringe()
    with pytest.raises(ValueError):
        spacing_fit(scan)


def test_projection_noise_multinomial_rows():
    noisy = add_projection_noise(two_ion_scan(0.3), 50, np.random.default_rng(0))
    total = sum(noisy.column(name) for name in SPACING_SERIES)
    assert np.allclose(total, 1.0)
    assert noisy.metadata["shots"] == 50
    # counts are integers out of 50
    assert np.allclose(noisy.column("p00") * 50, np.round(noisy.column("p00") * 50))


def test_projection_noise_single_series():
    noisy = add_projection_noise(fringe(), 10, np.random.default_rng(0))
    values = noisy.column("p_flip") * 10
    assert np.allclose(values, np.round(values))
    with pytest.raises(ValueError):
        add_projection_noise(fringe(), 0, np.random.default_rng(0))


def test_fit_fringe_shift_recovers_offset():
    reference = fringe()
    assert fit_fringe_shift(fringe(0.3), reference) == pytest.approx(0.3, abs=1e-3)
    assert fit_fringe_shift(fringe(-0.05), reference) == pytest.approx(-0.05, abs=1e-3)


def test_tone_scan_rejects_unknown_tone():
    with pytest.raises(ValueError):
        tone_scan(PhysParams(omega_rabi=TWO_PI * 300e3), "green", 0.0, TWO_PI / 15e-6)


@pytest.mark.slow
def test_calibrate_tones_recovers_offsets():
    params = PhysParams(omega_rabi=TWO_PI * 300e3, dphi_bd=0.1, dphi_rd=-0.05)
    outcome = calibrate_tones(params, TWO_PI / 15e-6, points=24, fock_cutoff=6, cfg=IntegratorConfig())
    assert outcome["dphi_bd"] == pytest.approx(0.1, abs=0.02)
    assert outcome["dphi_rd"] == pytest.approx(-0.05, abs=0.02)
    assert set(outcome["scans"]) == {"blue", "red", "blue_ref", "red_ref"}


@pytest.mark.slow
@pytest.mark.parametrize("injected", [0.0, 0.033, 0.2])
def test_spacing_fit_on_simulated_scan(injected):
    params = PhysParams(omega_rabi=TWO_PI * 50e3, dphi_sp=injected)
    scan = phase_scan(params, n_ions=2, points=73, fock_cutoff=6)
    assert spacing_fit(scan) == pytest.approx(injected, abs=1e-3)
    errors = noisy_fit_errors(scan, injected)
    assert np.sqrt(np.mean(errors ** 2)) < 0.033
