"""
Calibration of the two-ion standing-wave configuration.

Both procedures fit simulated (optionally shot-noise limited) fringe scans:
the ion spacing mismatch from the three two-ion population series, and the
phase offsets of the two tones of a bichromatic standing wave from the shift
of an off-resonant fringe against its zero-offset reference.
"""

import logging
import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares

from app.exceptions import FitError
from app.models import IntegratorConfig, PhysParams, PulseEnvelope, ScanResult, TWO_PI
from app.services.evolution import evolve
from app.services.hamiltonians import h_sw_exact, sideband_rabi_frequency
from app.services.hilbert import basis_state, build_space, resolve_cutoff
from app.services.sweeps import ProgressCallback, map_points

# Configure logging
logger = logging.getLogger(__name__)

SPACING_SERIES = ("p11", "p01+p10", "p00")
MAX_RMS_RESIDUAL = 0.25


def add_projection_noise(scan: ScanResult, shots: int, rng: np.random.Generator) -> ScanResult:
    """
    Replace the population series by shot-noise limited estimates.

    Two-ion scans draw multinomial outcomes over (p11, p01+p10, p00); single
    series draw binomial outcomes.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    series = dict(scan.series)
    if all(name in series for name in SPACING_SERIES):
        probs = np.column_stack([scan.column(name) for name in SPACING_SERIES])
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        counts = np.array([rng.multinomial(shots, row) for row in probs])
        for i, name in enumerate(SPACING_SERIES):
            series[name] = (counts[:, i] / shots).tolist()
    else:
        for name in scan.probability_series:
            series[name] = (rng.binomial(shots, np.clip(scan.column(name), 0.0, 1.0)) / shots).tolist()
    return scan.model_copy(update={"series": series, "metadata": {**scan.metadata, "shots": shots}})


def _flip_probability(dphi: np.ndarray) -> np.ndarray:
    return np.sin(0.5 * math.pi * np.sin(0.5 * dphi)) ** 2


def spacing_model(dphi: np.ndarray, dphi_sp: float) -> np.ndarray:
    """Populations (p11, p01+p10, p00) of two ions starting bright after a carrier pi-pulse."""
    q1 = _flip_probability(dphi)
    q2 = _flip_probability(dphi + dphi_sp)
    p00 = q1 * q2
    p11 = (1.0 - q1) * (1.0 - q2)
    return np.stack([p11, 1.0 - p00 - p11, p00])


def spacing_fit(scan: ScanResult, starts: Sequence[float] = (-0.5, -0.1, 0.1, 0.5)) -> float:
    """
    Fit the spacing phase mismatch of the second ion to a two-ion phase scan.

    Args:
        scan: Two-ion phase scan with p11, p01+p10 and p00
        starts: Initial guesses of the multistart least-squares fit

    Returns:
        dphi_sp in radians, wrapped to (-pi, pi]

    Raises:
        FitError: If no start converges or the residual is too large
    """
    missing = [name for name in SPACING_SERIES if name not in scan.series]
    if missing:
        raise ValueError(f"Scan lacks the two-ion series {missing}")
    dphi = np.asarray(scan.axis_values)
    data = np.stack([scan.column(name) for name in SPACING_SERIES])

    def residuals(x: np.ndarray) -> np.ndarray:
        return (spacing_model(dphi, x[0]) - data).ravel()

    best = None
    for start in starts:
        res = least_squares(residuals, x0=[start], bounds=([-math.pi], [math.pi]), xtol=1e-12, ftol=1e-12)
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError("Spacing fit did not converge from any start")
    rms = float(np.sqrt(np.mean(best.fun ** 2)))
    if rms > MAX_RMS_RESIDUAL:
        raise FitError(f"Spacing fit residual {rms:.3f} is too large", residual=rms)
    value = float(best.x[0])
    logger.info(f"Fitted spacing mismatch {value:.4f} rad (rms residual {rms:.2e})")
    return value


# Bichromatic offsets

def _tone_point(task: Tuple[PhysParams, float, float, float, Tuple[int, int], int, IntegratorConfig]) -> float:
    params, detuning, dphi, t_pulse, start, cutoff, cfg = task
    space = build_space(2, cutoff)
    h = h_sw_exact(params, space, detuning=detuning, dphi=dphi)
    env = PulseEnvelope(t_ramp=0.0, t_total=t_pulse, shape="square")
    psi = evolve(h, env, basis_state(space, list(start)), cfg)
    index = 2 * start[0] + start[1]
    return float(1.0 - psi.populations().sum(axis=1)[index])


def tone_scan(
    params: PhysParams,
    tone: str,
    offset: float,
    delta_g: float,
    points: int = 72,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> ScanResult:
    """
    Off-resonant monochromatic two-ion fringe of one tone of the bichromatic field.

    The blue tone sits at delta = omega_z - delta_g and starts from |down, down>;
    the red tone sits at -(omega_z - delta_g) and starts from |up, up>. The
    pulse is the blue-sideband pi-time. The fringe is scanned over one period of
    dphi with the tone's phase offset added.

    Returns:
        ScanResult over dphi with p_flip, the probability of leaving the initial state
    """
    if tone not in ("blue", "red"):
        raise ValueError(f"Unknown tone: {tone}")
    cfg = cfg or IntegratorConfig()
    p = params.model_copy(update={"n_ions": 2})
    fock_cutoff = resolve_cutoff(fock_cutoff)
    rate = sideband_rabi_frequency(p, fock_cutoff)
    if rate <= 0:
        raise ValueError("omega_rabi must be positive")
    t_pulse = math.pi / rate
    detuning = p.omega_z - delta_g
    start = (0, 0)
    if tone == "red":
        detuning, start = -detuning, (1, 1)
    axis = np.linspace(0.0, TWO_PI, points, endpoint=False)
    tasks = [(p, detuning, float(x + offset), t_pulse, start, fock_cutoff, cfg) for x in axis]
    flips = map_points(_tone_point, tasks, jobs=jobs, progress_callback=progress_callback)
    return ScanResult(
        axis_name="dphi_rad",
        axis_values=axis.tolist(),
        series={"p_flip": np.clip(flips, 0.0, 1.0).tolist()},
        probability_series=["p_flip"],
        metadata={"tone": tone, "offset_rad": offset, "t_pulse_s": t_pulse},
    )


def fit_fringe_shift(scan: ScanResult, reference: ScanResult, starts: int = 8) -> float:
    """
    Phase shift s such that scan(dphi) = reference(dphi + s).

    The reference is interpolated by a periodic cubic spline over one period.

    Returns:
        s wrapped to (-pi, pi]
    """
    x = np.append(reference.axis_values, TWO_PI)
    y = np.append(reference.column("p_flip"), reference.column("p_flip")[0])
    spline = CubicSpline(x, y, bc_type="periodic")
    dphi = np.asarray(scan.axis_values)
    data = scan.column("p_flip")

    def residuals(shift: np.ndarray) -> np.ndarray:
        return spline(np.mod(dphi + shift[0], TWO_PI)) - data

    best = None
    for start in np.linspace(-math.pi, math.pi, starts, endpoint=False):
        res = least_squares(residuals, x0=[start], xtol=1e-12, ftol=1e-12)
        if res.success and (best is None or res.cost < best.cost):
            best = res
    if best is None:
        raise FitError("Fringe shift fit did not converge")
    rms = float(np.sqrt(np.mean(best.fun ** 2)))
    if rms > MAX_RMS_RESIDUAL:
        raise FitError(f"Fringe shift residual {rms:.3f} is too large", residual=rms)
    return float(math.remainder(best.x[0], TWO_PI))


def calibrate_tones(
    params: PhysParams,
    delta_g: float,
    points: int = 72,
    shots: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
) -> Dict[str, object]:
    """
    Measure both tone offsets against zero-offset references.

    Returns:
        {"dphi_bd": ..., "dphi_rd": ..., "scans": {"blue": ..., "red": ..., "blue_ref": ..., "red_ref": ...}}
    """
    rng = rng or np.random.default_rng(0)
    injected = {"blue": params.dphi_bd, "red": params.dphi_rd}
    shifts: Dict[str, float] = {}
    scans: Dict[str, ScanResult] = {}
    for tone in ("blue", "red"):
        reference = tone_scan(params, tone, 0.0, delta_g, points, fock_cutoff, cfg, jobs)
        measured = tone_scan(params, tone, injected[tone], delta_g, points, fock_cutoff, cfg, jobs)
        if shots:
            measured = add_projection_noise(measured, shots, rng)
        shifts[tone] = fit_fringe_shift(measured, reference)
        scans[tone], scans[f"{tone}_ref"] = measured, reference
        logger.info(f"{tone} tone: injected {injected[tone]:.4f} rad, fitted {shifts[tone]:.4f} rad")
    return {"dphi_bd": shifts["blue"], "dphi_rd": shifts["red"], "scans": scans}


def bichromatic_offset_cal(
    params: PhysParams,
    delta_g: float = TWO_PI / 15e-6,
    points: int = 72,
    shots: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
) -> Tuple[float, float]:
    """
    Recover the blue- and red-tone phase offsets injected in params.

    Returns:
        (dphi_bd, dphi_rd)
    """
    result = calibrate_tones(params, delta_g, points, shots, rng, fock_cutoff, cfg, jobs)
    return result["dphi_bd"], result["dphi_rd"]
