import logging
import math

import numpy as np
import pytest

from app.exceptions import FitError
from app.models import LockConfig, LockTrace
from app.services import phase_lock
from app.services.phase_lock import (
    DEFAULT_CYCLE_PERIOD,
    cycle_period,
    histogram,
    lambda_fraction,
    ramsey_phase_estimate,
    simulate_lock,
)

QUIET = dict(drift_rate=0.0, pd_offset_drift=0.0, pd_residual=0.0)


def test_ramsey_estimate_converges():
    rng = np.random.default_rng(1)
    assert ramsey_phase_estimate(0.3, 1_000_000, rng) == pytest.approx(0.3, abs=0.01)
    with pytest.raises(ValueError):
        ramsey_phase_estimate(0.3, 0, rng)


@pytest.mark.parametrize("m_shots, expected", [(100, 0.10), (400, 0.05)])
def test_ramsey_estimator_shot_noise(m_shots, expected):
    rng = np.random.default_rng(2)
    trials = 4000
    estimates = np.array([ramsey_phase_estimate(0.0, m_shots, rng) for _ in range(trials)])
    assert estimates.std() == pytest.approx(expected, rel=0.05)
    assert abs(estimates.mean()) < 3 * estimates.std() / math.sqrt(trials)


def test_noise_free_lock_without_feedback_is_exact():
    trace = simulate_lock(LockConfig(**QUIET, ion_feedback=False, duration=10.0))
    assert trace.rms == 0.0
    with pytest.raises(FitError):
        histogram(trace)


def test_trace_layout():
    cfg = LockConfig(duration=10.0, m_feedback_shots=50, n_main_shots=150)
    trace = simulate_lock(cfg)
    cycles = math.ceil(cfg.duration / (200 * cfg.shot_period))
    assert trace.dphi.size == cycles * 150
    assert np.all(np.diff(trace.times) > 0)
    assert np.all(np.abs(trace.dphi) <= math.pi)


def test_lock_is_deterministic_per_seed():
    first = simulate_lock(LockConfig(duration=20.0, rng_seed=4))
    second = simulate_lock(LockConfig(duration=20.0, rng_seed=4))
    np.testing.assert_array_equal(first.dphi, second.dphi)


def test_shot_noise_floor():
    trace = simulate_lock(LockConfig(**QUIET, duration=200.0, rng_seed=3))
    assert 0.08 <= trace.rms <= 0.12


def test_default_noise_lock():
    trace = simulate_lock(LockConfig(duration=600.0, rng_seed=5))
    assert 0.10 <= trace.rms <= 0.15


def test_ion_feedback_beats_photodiode_only():
    for seed in range(10):
        both = simulate_lock(LockConfig(duration=1000.0, rng_seed=seed))
        pd_only = simulate_lock(LockConfig(duration=1000.0, rng_seed=seed, ion_feedback=False))
        assert both.rms <= pd_only.rms


def test_histogram_of_gaussian_samples():
    samples = np.random.default_rng(0).normal(0.0, 0.12, 20_000)
    trace = LockTrace(times=np.arange(samples.size, dtype=float), dphi=samples, rms=float(np.sqrt(np.mean(samples ** 2))))
    fit = histogram(trace, bins=41)
    assert fit.sigma == pytest.approx(0.12, rel=0.03)
    assert fit.mean == pytest.approx(0.0, abs=0.005)
    assert sum(fit.counts) == samples.size
    assert len(fit.edges) == 42
    assert not fit.non_gaussian


def test_histogram_flags_non_gaussian(caplog):
    samples = np.random.default_rng(0).uniform(-1.0, 1.0, 20_000)
    trace = LockTrace(times=np.arange(samples.size, dtype=float), dphi=samples, rms=float(np.sqrt(np.mean(samples ** 2))))
    with caplog.at_level(logging.WARNING):
        fit = histogram(trace)
    assert fit.non_gaussian
    assert fit.sigma == pytest.approx(2.0 / math.sqrt(12.0), rel=0.05)
    assert "not Gaussian" in caplog.text


def test_histogram_needs_enough_samples():
    samples = np.linspace(-0.1, 0.1, 50)
    trace = LockTrace(times=np.arange(50, dtype=float), dphi=samples, rms=float(np.sqrt(np.mean(samples ** 2))))
    with pytest.raises(ValueError):
        histogram(trace)


def test_lambda_fraction():
    fractions = lambda_fraction(0.12)
    assert fractions["sw_period_fraction"] == pytest.approx(0.12 / (2 * math.pi))
    assert fractions["wavelength_fraction"] == pytest.approx(0.12 / (4 * math.pi))
    assert fractions["lambda_over"] == pytest.approx(104.7, abs=0.1)
    with pytest.raises(ValueError):
        lambda_fraction(0.0)


def test_lock_trace_rejects_inconsistent_rms():
    with pytest.raises(ValueError):
        LockTrace(times=np.zeros(3), dphi=np.ones(3), rms=0.5)


def test_feedback_rms_plateaus_in_drift_rate():
    values = [simulate_lock(LockConfig(drift_rate=rate, duration=300.0, rng_seed=6)).rms for rate in (0.0, 0.01, 0.05)]
    assert max(values) / min(values) < 1.03


def test_ramsey_estimate_accepts_per_shot_phases():
    scalar = ramsey_phase_estimate(0.3, 500, np.random.default_rng(9))
    per_shot = ramsey_phase_estimate(np.full(500, 0.3), 500, np.random.default_rng(9))
    assert scalar == per_shot
    with pytest.raises(ValueError):
        ramsey_phase_estimate(np.zeros(10), 20, np.random.default_rng(0))


def test_lock_feedback_uses_ramsey_estimator(monkeypatch):
    calls = []

    def counting(true_phi, m_shots, rng):
        calls.append(m_shots)
        return ramsey_phase_estimate(true_phi, m_shots, rng)

    monkeypatch.setattr(phase_lock, "ramsey_phase_estimate", counting)
    cfg = LockConfig(duration=14.0, m_feedback_shots=40)
    simulate_lock(cfg)
    assert calls == [40] * math.ceil(14.0 / cycle_period(cfg))
    calls.clear()
    simulate_lock(LockConfig(duration=10.0, ion_feedback=False))
    assert calls == []


def test_cycle_period():
    assert DEFAULT_CYCLE_PERIOD == pytest.approx(1.0)
    assert cycle_period(LockConfig(ion_feedback=False)) == pytest.approx(0.5)
    assert cycle_period(LockConfig(m_feedback_shots=50, n_main_shots=150, shot_period=1e-3)) == pytest.approx(0.2)
