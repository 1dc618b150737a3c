"""
Gate-level analysis: fringe and detuning scans, spin-dependent force
extraction, Bell-state fidelities, Rabi optimization and power scaling.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from app.exceptions import FitError, OptimizationError
from app.models import GateResult, IntegratorConfig, PhysParams, PulseEnvelope, ScanResult, StateVector, TWO_PI
from app.services.evolution import evolve, gate_envelope
from app.services.gate_models import GateModel, get_gate_model
from app.services.hamiltonians import (
    carrier_rabi_frequency,
    h_sw_exact,
    sdf_analytic,
    sideband_rabi_frequency,
)
from app.services.hilbert import (
    annihilation,
    basis_state,
    build_space,
    embed,
    product_state,
    reduced_spin_density,
    resolve_cutoff,
    single_spin,
)
from app.services.sweeps import ProgressCallback, map_points
from app.utils.helpers import gaussian_expectation

# Configure logging
logger = logging.getLogger(__name__)

SDF_RESIDUAL_LIMIT = 0.02
SDF_TARGET_DISPLACEMENT = 1.25

# Fit windows of the fringe exponents, in radians from the fringe centre
QUARTIC_WINDOW = (0.15, 0.45)
QUADRATIC_WINDOW = (0.05, 0.3)


def fit_exponent(x: Sequence[float], y: Sequence[float]) -> float:
    """Power-law exponent from a log-log least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (x > 0) & (y > 0)
    if mask.sum() < 2:
        raise FitError("Need at least two positive points for a power-law fit")
    slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope)


def _square(t_pulse: float) -> PulseEnvelope:
    return PulseEnvelope(t_ramp=0.0, t_total=t_pulse, shape="square")


# Fringe scans

def _phase_scan_point(task: Tuple[PhysParams, float, float, int, IntegratorConfig]) -> np.ndarray:
    params, dphi, t_pulse, cutoff, cfg = task
    space = build_space(params.n_ions, cutoff)
    start = [0] if params.n_ions == 1 else [1, 1]
    psi = evolve(h_sw_exact(params.with_dphi(dphi), space), _square(t_pulse), basis_state(space, start), cfg)
    return psi.populations().sum(axis=1)


def carrier_pi_time(params: PhysParams, fock_cutoff: Optional[int] = None) -> float:
    rate = carrier_rabi_frequency(params, resolve_cutoff(fock_cutoff))
    if rate <= 0:
        raise ValueError("Carrier coupling vanishes; omega_rabi must be positive")
    return math.pi / rate


def phase_scan(
    params: PhysParams,
    n_ions: int = 1,
    points: int = 73,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> ScanResult:
    """
    Transfer probabilities of a resonant monochromatic standing wave versus its phase.

    The pulse is the pi-time of the maximally coupled carrier. One ion starts in
    |down, 0>; two ions start in |up, up, 0>.

    Returns:
        ScanResult over dphi with p_transfer (one ion) or p11, p01+p10, p00 (two ions)
    """
    cutoff = resolve_cutoff(fock_cutoff)
    cfg = cfg or IntegratorConfig()
    base = params.model_copy(update={"n_ions": n_ions, "delta": 0.0})
    t_pulse = carrier_pi_time(base, cutoff)
    axis = np.linspace(0.0, TWO_PI, points)
    logger.info(f"Phase scan: {n_ions} ion(s), {points} points, t_pulse={t_pulse * 1e6:.3f} us")

    tasks = [(base, float(dphi), t_pulse, cutoff, cfg) for dphi in axis]
    spins = map_points(_phase_scan_point, tasks, jobs=jobs, progress_callback=progress_callback)
    spins = np.clip(np.array(spins), 0.0, 1.0)

    if n_ions == 1:
        series = {"p_transfer": spins[:, 1].tolist()}
    else:
        series = {
            "p11": spins[:, 3].tolist(),
            "p01+p10": (spins[:, 1] + spins[:, 2]).tolist(),
            "p00": spins[:, 0].tolist(),
        }
    scan = ScanResult(
        axis_name="dphi_rad",
        axis_values=axis.tolist(),
        series=series,
        probability_series=list(series),
        metadata={"t_pulse_s": t_pulse, "n_ions": n_ions},
    )
    if n_ions == 1:
        try:
            scan.metadata.update(fringe_exponents(scan))
        except FitError as e:
            logger.warning(f"Fringe exponents skipped: {str(e)}")
    return scan


def fringe_exponents(scan: ScanResult) -> Dict[str, float]:
    """
    Local power laws of a single-ion fringe: 1 - p near dphi = pi and p near dphi = 0.

    Returns:
        {"quartic_exponent": ..., "quadratic_exponent": ...}
    """
    dphi = np.asarray(scan.axis_values)
    p = scan.column("p_transfer")

    off_node = np.abs(dphi - math.pi)
    near_node = (off_node >= QUARTIC_WINDOW[0]) & (off_node <= QUARTIC_WINDOW[1])
    off_antinode = np.minimum(dphi, TWO_PI - dphi)
    near_antinode = (off_antinode >= QUADRATIC_WINDOW[0]) & (off_antinode <= QUADRATIC_WINDOW[1])

    return {
        "quartic_exponent": fit_exponent(off_node[near_node], 1.0 - p[near_node]),
        "quadratic_exponent": fit_exponent(off_antinode[near_antinode], p[near_antinode]),
    }


def _detuning_point(task: Tuple[PhysParams, float, float, int, IntegratorConfig]) -> float:
    params, delta, t_pulse, cutoff, cfg = task
    space = build_space(1, cutoff)
    psi = evolve(h_sw_exact(params, space, detuning=delta), _square(t_pulse), basis_state(space, [0]), cfg)
    return float(psi.populations().sum(axis=1)[1])


def detuning_scan(
    params: PhysParams,
    placement: str = "node",
    resonance: str = "carrier",
    points: int = 73,
    span: Optional[float] = None,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> ScanResult:
    """
    Single-ion spectrum around the carrier or the blue sideband.

    Args:
        params: Physical parameters (omega_rabi must be set)
        placement: "node" (dphi = pi) or "antinode" (dphi = 0)
        resonance: "carrier" (delta around 0) or "sideband" (delta around omega_z)
        points: Number of detunings
        span: Half width of the sweep; defaults to four pi-pulse Rabi frequencies

    Returns:
        ScanResult over delta with p_transfer
    """
    if placement not in ("node", "antinode"):
        raise ValueError(f"Unknown placement: {placement}")
    if resonance not in ("carrier", "sideband"):
        raise ValueError(f"Unknown resonance: {resonance}")
    cutoff = resolve_cutoff(fock_cutoff)
    cfg = cfg or IntegratorConfig()
    base = params.model_copy(update={"n_ions": 1})
    if resonance == "carrier":
        rate = carrier_rabi_frequency(base, cutoff)
        center = 0.0
    else:
        rate = sideband_rabi_frequency(base, cutoff)
        center = base.omega_z
    if rate <= 0:
        raise ValueError("Coupling vanishes; omega_rabi must be positive")
    t_pulse = math.pi / rate
    span = 4.0 * rate if span is None else span
    axis = center + np.linspace(-span, span, points)

    dphi = math.pi if placement == "node" else 0.0
    tasks = [(base.with_dphi(dphi), float(delta), t_pulse, cutoff, cfg) for delta in axis]
    logger.info(f"Detuning scan: {placement}/{resonance}, {points} points, t_pulse={t_pulse * 1e6:.3f} us")
    p = map_points(_detuning_point, tasks, jobs=jobs, progress_callback=progress_callback)
    return ScanResult(
        axis_name="delta_rad_s",
        axis_values=axis.tolist(),
        series={"p_transfer": np.clip(p, 0.0, 1.0).tolist()},
        probability_series=["p_transfer"],
        metadata={"t_pulse_s": t_pulse, "placement": placement, "resonance": resonance},
    )


# Spin-dependent force

def _displacement(task: Tuple[str, PhysParams, PulseEnvelope, int, IntegratorConfig]) -> float:
    model_name, params, env, cutoff, cfg = task
    model = get_gate_model(model_name)
    space = build_space(1, cutoff)
    phase = model.force_phase(params)
    spin = np.array([1.0, np.exp(1j * phase)]) / math.sqrt(2.0)
    psi = evolve(model.hamiltonian(params, space), env, product_state(space, spin), cfg)
    # the state may come back on a grown space
    grown = psi.space
    observable = embed(single_spin("phi", phase), annihilation(grown.n_fock))
    return float(abs(np.vdot(psi.amplitudes, observable @ psi.amplitudes)))


def extract_sdf(
    params: PhysParams,
    model: str = "tw_ms",
    t_ramp: float = 3.6e-6,
    durations: int = 5,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
) -> float:
    """
    Spin-dependent force of a bichromatic field at delta = omega_z.

    The spin starts in the +1 eigenstate of the force operator and the motion in
    |0>, so the displacement |<S a>| grows linearly with the plateau time at rate
    Omega_SDF / 2.

    Returns:
        Omega_SDF in rad/s

    Raises:
        FitError: If the growth is not linear within the residual limit
    """
    gate_model = get_gate_model(model)
    cutoff = resolve_cutoff(fock_cutoff)
    cfg = cfg or IntegratorConfig()
    p = params.model_copy(update={"n_ions": 1, "delta": params.omega_z})
    if p.omega_rabi <= 0:
        raise ValueError("omega_rabi must be positive to extract a force")

    expected = gate_model.sdf_scale(p)
    if gate_model.name == "tw_ms":
        expected = sdf_analytic(p.eta, p.omega_rabi, p.delta)
    t_max = 2.0 * SDF_TARGET_DISPLACEMENT / abs(expected)
    plateaus = np.linspace(0.2, 1.0, durations) * t_max

    tasks = [
        (model, p, PulseEnvelope(t_ramp=t_ramp, t_total=2.0 * t_ramp + plateau), cutoff, cfg)
        for plateau in plateaus
    ]
    alpha = np.array(map_points(_displacement, tasks, jobs=jobs))

    slope, intercept = np.polyfit(plateaus, alpha, 1)
    residual = alpha - (slope * plateaus + intercept)
    relative = float(np.sqrt(np.mean(residual ** 2)) / np.mean(alpha))
    if relative > SDF_RESIDUAL_LIMIT:
        raise FitError(f"Displacement growth of '{model}' is not linear (residual {relative:.3%})", residual=relative)
    omega_sdf = 2.0 * float(slope)
    logger.info(f"{model}: Omega_SDF = {omega_sdf:.4e} rad/s (normalized {omega_sdf / gate_model.sdf_scale(p):.4f})")
    return omega_sdf


def sdf_curve(
    params: PhysParams,
    x_values: Sequence[float],
    t_ramp: float = 3.6e-6,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> ScanResult:
    """Normalized traveling- and standing-wave forces versus 2 Omega / delta at delta = omega_z."""
    tw_norm: List[float] = []
    sw_norm: List[float] = []
    analytic: List[float] = []
    delta = params.omega_z
    for i, x in enumerate(x_values):
        p = params.model_copy(update={"n_ions": 1, "delta": delta, "omega_rabi": 0.5 * x * delta, "phi1": 0.0, "phi2": 0.0})
        tw = extract_sdf(p, "tw_ms", t_ramp, fock_cutoff=fock_cutoff, cfg=cfg, jobs=jobs)
        sw = extract_sdf(p, "sw_ms", t_ramp, fock_cutoff=fock_cutoff, cfg=cfg, jobs=jobs)
        tw_norm.append(tw / (p.eta * p.omega_rabi))
        sw_norm.append(sw / (p.eta * 2.0 * p.omega_rabi))
        analytic.append(sdf_analytic(p.eta, p.omega_rabi, delta) / (p.eta * p.omega_rabi))
        if progress_callback:
            progress_callback(i + 1, len(x_values))
    return ScanResult(
        axis_name="x_2omega_over_delta",
        axis_values=[float(x) for x in x_values],
        series={"sdf_tw_norm": tw_norm, "sdf_sw_norm": sw_norm, "sdf_tw_analytic": analytic},
        metadata={"t_ramp_s": t_ramp},
    )


# Two-qubit gates

def bell_fidelity_of_state(psi: StateVector) -> float:
    """Overlap with the best even Bell state (|dd> + e^(i zeta) |uu>)/sqrt(2), motion traced out."""
    rho = reduced_spin_density(psi)
    return float(0.5 * (rho[0, 0].real + rho[3, 3].real) + abs(rho[0, 3]))


def bell_fidelity(
    model: GateModel,
    params: PhysParams,
    delta_g: float,
    env: PulseEnvelope,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
) -> float:
    """
    Bell-state fidelity of a gate at delta = omega_z + delta_g.

    Args:
        model: Gate scheme
        params: Physical parameters; omega_rabi is the per-beam Rabi frequency
        delta_g: Gate detuning from the sideband
        env: Pulse envelope

    Returns:
        Fidelity in [0, 1]
    """
    p = model.gate_params(params, delta_g, params.omega_rabi)
    space = build_space(2, resolve_cutoff(fock_cutoff))
    psi = basis_state(space, [0, 0])
    if p.omega_rabi > 0:
        psi = evolve(model.hamiltonian(p, space), env, psi, cfg)
    return min(1.0, max(0.0, bell_fidelity_of_state(psi)))


def _fidelity_point(task: Tuple[str, PhysParams, float, PulseEnvelope, int, IntegratorConfig]) -> float:
    model_name, params, delta_g, env, cutoff, cfg = task
    return bell_fidelity(get_gate_model(model_name), params, delta_g, env, cutoff, cfg)


def optimize_rabi(
    model: GateModel,
    params: PhysParams,
    delta_g: float,
    env: PulseEnvelope,
    grid_points: int = 40,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
) -> Tuple[float, float]:
    """
    Maximize the Bell-state fidelity over the Rabi frequency.

    A geometric grid over [0.05, 3] x delta/2 locates the best basin, then a
    golden-section search refines it to a relative width of 1e-3.

    Returns:
        (omega_star, fidelity)

    Raises:
        OptimizationError: If the landscape is flat
    """
    if delta_g <= 0:
        raise ValueError(f"delta_g must be positive, got {delta_g}")
    cutoff = resolve_cutoff(fock_cutoff)
    cfg = cfg or IntegratorConfig()
    delta = params.omega_z + delta_g
    grid = np.geomspace(0.05, 3.0, grid_points) * 0.5 * delta

    tasks = [
        (model.name, params.model_copy(update={"omega_rabi": float(omega)}), delta_g, env, cutoff, cfg)
        for omega in grid
    ]
    values = np.array(map_points(_fidelity_point, tasks, jobs=jobs))
    if values.max() - values.min() < 1e-6:
        raise OptimizationError(f"Fidelity landscape of '{model.name}' is flat at delta_g={delta_g:.4e}")

    best = int(np.argmax(values))

    def objective(omega: float) -> float:
        return -bell_fidelity(model, params.model_copy(update={"omega_rabi": float(omega)}), delta_g, env, cutoff, cfg)

    if 0 < best < grid_points - 1:
        res = minimize_scalar(
            objective,
            bracket=(grid[best - 1], grid[best], grid[best + 1]),
            method="golden",
            options={"xtol": 1e-3},
        )
    else:
        lo, hi = (grid[0], grid[1]) if best == 0 else (grid[-2], grid[-1])
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-3 * lo})

    omega_star, fidelity = float(grid[best]), float(values[best])
    if -res.fun > fidelity:
        omega_star, fidelity = float(res.x), float(-res.fun)
    logger.info(
        f"{model.name}: t_eff={TWO_PI / delta_g * 1e6:.1f} us, "
        f"Omega*={omega_star / TWO_PI / 1e3:.2f} kHz, F={fidelity:.6f}"
    )
    return omega_star, fidelity


def optimized_gates(
    model: GateModel,
    params: PhysParams,
    durations: Sequence[float],
    t_ramp: float = 10e-6,
    shape: str = "sin2_ramp",
    grid_points: int = 40,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[GateResult]:
    """
    Optimize the gate at each effective duration 2 pi/delta_g.

    rel_power is beams x omega_star^2 over the predicted standing-wave power
    at the slowest duration.
    """
    if not durations:
        raise ValueError("At least one duration is required")
    slowest = TWO_PI / max(durations)
    sw = get_gate_model("sw_ms")
    reference = sw.beams * sw.predicted_rabi(params, slowest, gate_envelope(slowest, t_ramp, shape)) ** 2
    results: List[GateResult] = []
    for i, duration in enumerate(durations):
        delta_g = TWO_PI / duration
        env = gate_envelope(delta_g, t_ramp, shape)
        omega_star, fidelity = optimize_rabi(model, params, delta_g, env, grid_points, fock_cutoff, cfg, jobs)
        results.append(
            GateResult(
                t_gate_eff=float(duration),
                delta_g=delta_g,
                omega_star=omega_star,
                fidelity=float(np.clip(fidelity, 0.0, 1.0)),
                rel_power=model.beams * omega_star ** 2 / reference,
            )
        )
        if progress_callback:
            progress_callback(i + 1, len(durations))
    return results


def fidelity_vs_duration(
    model: GateModel,
    params: PhysParams,
    durations: Sequence[float],
    t_ramp: float = 10e-6,
    shape: str = "sin2_ramp",
    grid_points: int = 40,
    fock_cutoff: Optional[int] = None,
    cfg: Optional[IntegratorConfig] = None,
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> ScanResult:
    """Optimized fidelity, Rabi frequency and relative power for each effective gate duration."""
    results = optimized_gates(
        model, params, durations, t_ramp, shape, grid_points, fock_cutoff, cfg, jobs, progress_callback
    )
    return ScanResult(
        axis_name="t_gate_eff_s",
        axis_values=[r.t_gate_eff for r in results],
        series={
            "fidelity": [r.fidelity for r in results],
            "omega_star": [r.omega_star for r in results],
            "rel_power": [r.rel_power for r in results],
        },
        probability_series=["fidelity"],
        metadata={"model": model.name, "t_ramp_s": t_ramp, "shape": shape},
    )


def predicted_rabi(model: GateModel, params: PhysParams, delta_g: float, env: PulseEnvelope) -> float:
    """Per-beam Rabi frequency closing the gate in the rotating-wave picture (NaN if unreachable)."""
    return model.predicted_rabi(params, delta_g, env)


def power_curves(
    params: PhysParams,
    durations: Sequence[float],
    t_ramp: float = 0.0,
    shape: str = "square",
) -> ScanResult:
    """
    Relative laser power of the standing- and traveling-wave gates.

    Power per beam scales as Omega^2; the standing wave needs two beams, the
    traveling wave one. Both series are normalized to the standing wave at the
    slowest duration. Durations beyond the traveling-wave force limit are NaN.
    """
    if not durations:
        raise ValueError("At least one duration is required")
    sw = get_gate_model("sw_ms")
    tw = get_gate_model("tw_ms")
    omega_sw: List[float] = []
    omega_tw: List[float] = []
    for duration in durations:
        delta_g = TWO_PI / duration
        env = gate_envelope(delta_g, t_ramp, shape)
        omega_sw.append(sw.predicted_rabi(params, delta_g, env))
        omega_tw.append(tw.predicted_rabi(params, delta_g, env))

    power_sw = sw.beams * np.asarray(omega_sw) ** 2
    power_tw = tw.beams * np.asarray(omega_tw) ** 2
    reference = power_sw[int(np.argmax(durations))]
    attainable = np.isfinite(power_tw)
    for duration in np.asarray(durations)[~attainable]:
        logger.warning(f"Traveling-wave gate of {duration * 1e6:.1f} us is beyond the force limit")

    return ScanResult(
        axis_name="t_gate_eff_s",
        axis_values=[float(d) for d in durations],
        series={
            "rel_power_sw": (power_sw / reference).tolist(),
            "rel_power_tw": (power_tw / reference).tolist(),
            "tw_over_sw": (power_tw / power_sw).tolist(),
            "omega_sw": omega_sw,
            "omega_tw": omega_tw,
            "tw_attainable": attainable.astype(float).tolist(),
        },
        metadata={
            "sw_power_exponent": fit_exponent(durations, power_sw),
            "shape": shape,
            "t_ramp_s": t_ramp,
        },
    )


def carrier_suppression(rabi_imbalance_rel: float, sigma_phi: float) -> float:
    """
    Predicted ratio of maximal to minimal carrier Rabi frequency.

    Args:
        rabi_imbalance_rel: Beam imbalance dOmega/Omega
        sigma_phi: rms of the standing-wave phase (Gaussian, zero mean)

    Returns:
        1/sqrt((dOmega/2Omega)^2 + E[sin^2(dphi/2)]), infinite for an ideal standing wave
    """
    if rabi_imbalance_rel < 0 or sigma_phi < 0:
        raise ValueError("Imbalance and phase noise must be non-negative")
    residual = (0.5 * rabi_imbalance_rel) ** 2 + gaussian_expectation(lambda x: np.sin(0.5 * x) ** 2, sigma_phi)
    if residual == 0.0:
        return float("inf")
    return float(1.0 / math.sqrt(residual))

