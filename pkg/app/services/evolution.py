"""
Time evolution under pulse-shaped time-dependent Hamiltonians.

Steps use the midpoint matrix exponential (second-order Magnus):
psi <- exp(-i g(t + dt/2) H(t + dt/2) dt) psi. Every result is checked by
step halving and by the population of the two highest Fock levels.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import expm

from app.config import get_settings
from app.exceptions import ConvergenceError, NumericalError, TruncationError
from app.models import IntegratorConfig, OperatorMatrix, PulseEnvelope, StateVector, TWO_PI
from app.services.hamiltonians import TimedOperator
from app.services.hilbert import build_space, embed_state, top_fock_population

# Configure logging
logger = logging.getLogger(__name__)

MAX_FOCK_CUTOFF = 200


def envelope(t: float, env: PulseEnvelope) -> float:
    """
    Amplitude g(t) of the pulse.

    Raises:
        ValueError: If t lies outside [0, t_total]
    """
    if t < 0.0 or t > env.t_total:
        raise ValueError(f"t = {t} outside the pulse [0, {env.t_total}]")
    return float(envelope_values(np.array([t]), env)[0])


def envelope_values(times: np.ndarray, env: PulseEnvelope) -> np.ndarray:
    """Vectorized envelope; times are assumed to lie inside the pulse."""
    times = np.asarray(times, dtype=float)
    if env.shape == "square" or env.t_ramp == 0.0:
        return np.ones_like(times)
    t_r = env.t_ramp
    g = np.ones_like(times)
    rising = times < t_r
    falling = times > env.t_total - t_r
    g[rising] = np.sin(math.pi * times[rising] / (2.0 * t_r)) ** 2
    g[falling] = np.sin(math.pi * (env.t_total - times[falling]) / (2.0 * t_r)) ** 2
    return g


def gate_envelope(delta_g: float, t_ramp: float, shape: str = "sin2_ramp") -> PulseEnvelope:
    """Gate pulse of total length 2 pi/delta_g + t_R (effective duration 2 pi/delta_g)."""
    if delta_g <= 0:
        raise ValueError(f"delta_g must be positive, got {delta_g}")
    if shape == "square":
        return PulseEnvelope(t_ramp=0.0, t_total=TWO_PI / delta_g, shape="square")
    return PulseEnvelope(t_ramp=t_ramp, t_total=TWO_PI / delta_g + t_ramp, shape=shape)


def default_dt(h: TimedOperator) -> float:
    settings = get_settings()
    return TWO_PI / max(h.rate_scale, TWO_PI) / settings.DT_SAMPLES


def _integrate(
    h: TimedOperator,
    env: PulseEnvelope,
    columns: np.ndarray,
    dt: float,
    t_start: float = 0.0,
    t_stop: Optional[float] = None,
) -> np.ndarray:
    t_stop = env.t_total if t_stop is None else t_stop
    span = t_stop - t_start
    if span <= 0.0:
        return columns.copy()
    n_steps = max(1, int(math.ceil(span / dt - 1e-9)))
    step = span / n_steps
    mids = t_start + (np.arange(n_steps) + 0.5) * step
    amps = envelope_values(mids, env)
    out = columns.copy()
    for t_mid, g in zip(mids, amps):
        if g == 0.0:
            continue
        out = expm(-1j * g * step * h.matrix(t_mid)) @ out
    return out


def _infidelity(coarse: np.ndarray, fine: np.ndarray) -> float:
    """Worst column-wise 1 - |<coarse|fine>|^2."""
    overlaps = np.abs(np.sum(coarse.conj() * fine, axis=0)) ** 2
    return float(np.max(1.0 - overlaps))


def _converged_columns(
    h: TimedOperator,
    env: PulseEnvelope,
    columns: np.ndarray,
    cfg: IntegratorConfig,
    t_start: float = 0.0,
    t_stop: Optional[float] = None,
) -> np.ndarray:
    dt = cfg.dt_init or default_dt(h)
    coarse = _integrate(h, env, columns, dt, t_start, t_stop)
    change = float("inf")
    for level in range(cfg.max_refinements + 1):
        dt *= 0.5
        fine = _integrate(h, env, columns, dt, t_start, t_stop)
        change = _infidelity(coarse, fine)
        logger.debug(f"{h.label}: refinement {level + 1}, dt={dt:.3e}, change={change:.3e}")
        if change < cfg.tol:
            return fine
        coarse = fine
    raise ConvergenceError(
        f"Step halving did not converge for '{h.label}' (change {change:.3e} > tol {cfg.tol:.1e})",
        coarse=coarse,
        fine=fine,
        change=change,
    )


def _grow(h: TimedOperator, top: float) -> TimedOperator:
    settings = get_settings()
    if h.builder is None:
        raise TruncationError(
            f"Top Fock population {top:.2e} exceeds threshold and '{h.label}' cannot be rebuilt",
            top_population=top,
        )
    new_cutoff = h.space.fock_cutoff + settings.FOCK_GROWTH
    if new_cutoff > MAX_FOCK_CUTOFF:
        raise TruncationError(f"Fock cutoff would exceed {MAX_FOCK_CUTOFF}", top_population=top)
    logger.debug(f"{h.label}: top Fock population {top:.2e}, growing cutoff to {new_cutoff}")
    return h.rebuild(build_space(h.space.n_ions, new_cutoff))


def evolve(
    h: TimedOperator,
    env: PulseEnvelope,
    psi0: StateVector,
    cfg: Optional[IntegratorConfig] = None,
) -> StateVector:
    """
    Integrate i d psi/dt = g(t) H(t) psi over the whole pulse.

    Args:
        h: Time-dependent Hamiltonian
        env: Pulse envelope g(t)
        psi0: Initial state on the same space as h
        cfg: Step control

    Returns:
        Final state; its space may have a larger Fock cutoff than psi0 when the
        truncation check forced the operator to be rebuilt

    Raises:
        ConvergenceError: If step halving fails to converge
        TruncationError: If the cutoff must grow but the operator cannot be rebuilt
    """
    cfg = cfg or IntegratorConfig()
    if psi0.space != h.space:
        raise ValueError("Hamiltonian and initial state live on different spaces")
    threshold = get_settings().TRUNCATION_THRESHOLD

    while True:
        column = psi0.amplitudes.reshape(-1, 1)
        final = _converged_columns(h, env, column, cfg)[:, 0]
        top = top_fock_population(h.space, final)
        if top <= threshold:
            break
        h = _grow(h, top)
        psi0 = embed_state(psi0, h.space)

    norm = np.linalg.norm(final)
    if abs(norm - 1.0) > 1e-10:
        raise NumericalError(f"Norm drifted to {norm:.12f} during '{h.label}'")
    return StateVector(space=h.space, amplitudes=final)


def propagator(
    h: TimedOperator,
    env: PulseEnvelope,
    cfg: Optional[IntegratorConfig] = None,
    t_start: float = 0.0,
    t_stop: Optional[float] = None,
) -> OperatorMatrix:
    """
    Full unitary of the pulse, optionally restricted to [t_start, t_stop].

    The truncation check covers the columns that start in the motional ground state;
    columns starting high on the Fock ladder leak by construction.
    """
    cfg = cfg or IntegratorConfig()
    threshold = get_settings().TRUNCATION_THRESHOLD

    while True:
        identity = np.eye(h.space.dim, dtype=complex)
        unitary = _converged_columns(h, env, identity, cfg, t_start, t_stop)
        ground_columns = unitary[:, :: h.space.n_fock]
        top = top_fock_population(h.space, ground_columns)
        if top <= threshold:
            break
        h = _grow(h, top)

    defect = np.max(np.abs(unitary.conj().T @ unitary - np.eye(h.space.dim)))
    if defect > 1e-9:
        raise NumericalError(f"Propagator of '{h.label}' is not unitary (defect {defect:.2e})")
    return OperatorMatrix(space=h.space, entries=unitary)


def convergence_ratio(h: TimedOperator, env: PulseEnvelope, psi0: StateVector, dt: float) -> Tuple[float, float, float]:
    """
    Measure the step-halving error ratio at a fixed coarse step.

    Returns:
        (ratio, err_dt, err_half) where err_dt = |psi(dt) - psi(dt/2)| and
        err_half = |psi(dt/2) - psi(dt/4)|; second order gives ratio ~ 4
    """
    column = psi0.amplitudes.reshape(-1, 1)
    psi_1 = _integrate(h, env, column, dt)
    psi_2 = _integrate(h, env, column, dt / 2.0)
    psi_4 = _integrate(h, env, column, dt / 4.0)
    err_dt = float(np.linalg.norm(psi_1 - psi_2))
    err_half = float(np.linalg.norm(psi_2 - psi_4))
    if err_half == 0.0:
        raise NumericalError("Refined solutions coincide; the ratio is undefined")
    return err_dt / err_half, err_dt, err_half
