"""
Monte Carlo model of the two-loop standing-wave phase stabilization.

A photodiode loop resets the interferometer phase before every shot, leaving
a small residual and the slowly drifting offset between the photodiode lock
point and the ion. Interleaved zero-delay Ramsey shots on the ion estimate
that offset and correct it through the phase of beam b1.
"""

import logging
import math
from typing import Dict, Union

import numpy as np
from scipy.stats import kstest, norm

from app.exceptions import FitError
from app.models import HistogramFit, LockConfig, LockTrace

# Configure logging
logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
KS_THRESHOLD = 0.01


def ramsey_phase_estimate(true_phi: Union[float, np.ndarray], m_shots: int, rng: np.random.Generator) -> float:
    """
    Phase estimated from m_shots zero-delay Ramsey experiments.

    Each shot is bright with probability (1 + sin phi)/2; the estimate inverts the
    observed fraction. true_phi is one phase for all shots or one phase per shot.

    Returns:
        arcsin(2k/M - 1) in radians
    """
    if m_shots < 1:
        raise ValueError(f"m_shots must be >= 1, got {m_shots}")
    phases = np.asarray(true_phi, dtype=float)
    if phases.ndim and phases.shape != (m_shots,):
        raise ValueError(f"Expected {m_shots} per-shot phases, got {phases.shape[0]}")
    bright = rng.random(m_shots) < 0.5 * (1.0 + np.sin(phases))
    return float(np.arcsin(2.0 * bright.sum() / m_shots - 1.0))


def cycle_period(cfg: LockConfig) -> float:
    """Seconds per feedback cycle: M Ramsey shots (when ion feedback is on) plus N main shots."""
    feedback = cfg.m_feedback_shots if cfg.ion_feedback else 0
    return (feedback + cfg.n_main_shots) * cfg.shot_period


# 100 + 100 shots of 5 ms: each block lasts 0.5 s, the full cycle 1 s
DEFAULT_CYCLE_PERIOD = cycle_period(LockConfig())


def _wrap(phases: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * phases))


def simulate_lock(cfg: LockConfig) -> LockTrace:
    """
    Simulate alternating feedback and main-sequence shots.

    Every shot sees the photodiode-to-ion offset (a Wiener process), the
    photodiode loop residual and the path-length drift accumulated during one
    shot period, minus the current correction. With ion feedback enabled each
    cycle starts with M Ramsey shots whose estimate is added to the correction.

    Returns:
        LockTrace of the phase at the ion during the main shots
    """
    rng = np.random.default_rng(cfg.rng_seed)
    feedback = cfg.m_feedback_shots if cfg.ion_feedback else 0
    per_cycle = feedback + cfg.n_main_shots
    cycles = max(1, int(math.ceil(cfg.duration / cycle_period(cfg))))
    step = math.sqrt(cfg.shot_period)
    logger.info(
        f"Lock simulation: {cycles} cycles of {per_cycle} shots, ion feedback {'on' if cfg.ion_feedback else 'off'}"
    )

    offset = 0.0
    correction = 0.0
    times = []
    phases = []
    for cycle in range(cycles):
        walk = offset + np.cumsum(rng.normal(0.0, cfg.pd_offset_drift * step, per_cycle))
        jitter = rng.normal(0.0, cfg.pd_residual, per_cycle) + rng.normal(0.0, cfg.drift_rate * step, per_cycle)
        at_ion = walk + jitter - correction
        offset = float(walk[-1])

        if feedback:
            estimate = ramsey_phase_estimate(at_ion[:feedback], feedback, rng)
            correction += estimate
            at_ion[feedback:] -= estimate

        start = cycle * per_cycle + feedback
        times.append((start + np.arange(cfg.n_main_shots)) * cfg.shot_period)
        phases.append(at_ion[feedback:])

    dphi = _wrap(np.concatenate(phases))
    rms = float(np.sqrt(np.mean(dphi ** 2)))
    logger.info(f"Residual phase at the ion: {rms:.4f} rad rms over {dphi.size} shots")
    return LockTrace(times=np.concatenate(times), dphi=dphi, rms=rms)


def histogram(trace: LockTrace, bins: int = 41) -> HistogramFit:
    """
    Bin the recorded phases and fit a Gaussian.

    Raises:
        ValueError: If fewer than 100 samples are available
        FitError: If the samples have no spread
    """
    data = np.asarray(trace.dphi, dtype=float)
    if data.size < MIN_SAMPLES:
        raise ValueError(f"Need at least {MIN_SAMPLES} samples, got {data.size}")
    if np.ptp(data) == 0.0:
        raise FitError("Phase samples are all identical; no Gaussian can be fitted")
    mean, sigma = norm.fit(data)
    counts, edges = np.histogram(data, bins=bins)
    pvalue = float(kstest(data, "norm", args=(mean, sigma)).pvalue)
    non_gaussian = pvalue < KS_THRESHOLD
    if non_gaussian:
        logger.warning(f"Phase distribution is not Gaussian (KS p-value {pvalue:.2e})")
    return HistogramFit(
        counts=counts.tolist(),
        edges=edges.tolist(),
        mean=float(mean),
        sigma=float(sigma),
        ks_pvalue=pvalue,
        non_gaussian=non_gaussian,
    )


def lambda_fraction(sigma: float) -> Dict[str, float]:
    """
    Express a phase rms as a position jitter.

    The standing wave repeats every lambda/2, so sigma/(2 pi) of its period is
    sigma/(4 pi) of the wavelength.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return {
        "sw_period_fraction": sigma / (2.0 * math.pi),
        "wavelength_fraction": sigma / (4.0 * math.pi),
        "lambda_over": 4.0 * math.pi / sigma,
    }
