import logging
import math
from abc import ABC, abstractmethod

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.optimize import brentq
from scipy.special import jv

from app.models import PhysParams, PulseEnvelope, SpaceDescriptor
from app.services.evolution import envelope_values
from app.services.hamiltonians import TimedOperator, h_sw_ms, h_tw_ms, sdf_speed_limit

# Configure logging
logger = logging.getLogger(__name__)

# The spin-spin phase of a maximally entangling gate
GATE_PHASE = math.pi / 8.0

PHASE_GRID_POINTS = 20001


def geometric_phase_per_force(delta_g: float, env: PulseEnvelope) -> float:
    """
    Geometric phase per unit squared force for an envelope g(t).

    Evaluates the double integral of g(t) g(t') sin(delta_g (t - t')) over t' < t.
    A force f closes a maximally entangling gate when f^2 times this equals pi/8.
    """
    if delta_g <= 0:
        raise ValueError(f"delta_g must be positive, got {delta_g}")
    times = np.linspace(0.0, env.t_total, PHASE_GRID_POINTS)
    g = envelope_values(times, env)
    c = cumulative_trapezoid(g * np.cos(delta_g * times), times, initial=0.0)
    s = cumulative_trapezoid(g * np.sin(delta_g * times), times, initial=0.0)
    integrand = g * (np.sin(delta_g * times) * c - np.cos(delta_g * times) * s)
    return float(trapezoid(integrand, times))


def required_force(delta_g: float, env: PulseEnvelope) -> float:
    """Force amplitude f of the rotating-wave SDF Hamiltonian that completes the gate."""
    phase = geometric_phase_per_force(delta_g, env)
    if phase <= 0:
        raise ValueError("Envelope accumulates no geometric phase at this detuning")
    return math.sqrt(GATE_PHASE / phase)


class GateModel(ABC):
    """Abstract base class for bichromatic entangling-gate schemes."""

    name: str = ""
    beams: int = 1

    def gate_params(self, params: PhysParams, delta_g: float, omega_rabi: float) -> PhysParams:
        """Two ions driven at delta = omega_z + delta_g with the given Rabi frequency."""
        return params.model_copy(
            update={"n_ions": 2, "delta": params.omega_z + delta_g, "omega_rabi": omega_rabi}
        )

    @abstractmethod
    def hamiltonian(self, params: PhysParams, space: SpaceDescriptor) -> TimedOperator:
        """
        Build the time-dependent Hamiltonian of the scheme.

        Args:
            params: Physical parameters (delta and omega_rabi already set)
            space: Composite space

        Returns:
            The scheme's TimedOperator
        """
        pass

    @abstractmethod
    def force_phase(self, params: PhysParams) -> float:
        """Phase of the spin operator the force couples to."""
        pass

    @abstractmethod
    def sdf_scale(self, params: PhysParams) -> float:
        """Coupling that normalizes the extracted force (eta Omega or eta 2 Omega)."""
        pass

    @abstractmethod
    def rabi_for_force(self, params: PhysParams, force: float, delta: float) -> float:
        """
        Per-beam Rabi frequency producing a rotating-wave force amplitude.

        Returns:
            Rabi frequency, or NaN when the force cannot be reached
        """
        pass

    def predicted_rabi(self, params: PhysParams, delta_g: float, env: PulseEnvelope) -> float:
        """Analytic operating point from the loop closure and phase condition."""
        force = required_force(delta_g, env)
        return self.rabi_for_force(params, force, params.omega_z + delta_g)


class SWGateModel(GateModel):
    """Bichromatic standing wave without Lamb-Dicke truncation."""

    name = "sw_ms"
    beams = 2

    def hamiltonian(self, params: PhysParams, space: SpaceDescriptor) -> TimedOperator:
        return h_sw_ms(params, space, variant="exact")

    def force_phase(self, params: PhysParams) -> float:
        return params.tilde_phi

    def sdf_scale(self, params: PhysParams) -> float:
        return params.eta * 2.0 * params.omega_rabi

    def rabi_for_force(self, params: PhysParams, force: float, delta: float) -> float:
        # f = eta Omega at the anti-node, independent of delta
        return force / params.eta


class TWGateModel(GateModel):
    """Bichromatic traveling wave with its carrier term."""

    name = "tw_ms"
    beams = 1

    def hamiltonian(self, params: PhysParams, space: SpaceDescriptor) -> TimedOperator:
        return h_tw_ms(params, space, phi=0.0, variant="lamb_dicke")

    def force_phase(self, params: PhysParams) -> float:
        return 0.0

    def sdf_scale(self, params: PhysParams) -> float:
        return params.eta * params.omega_rabi

    def rabi_for_force(self, params: PhysParams, force: float, delta: float) -> float:
        # f = Omega_SDF / 2 with Omega_SDF = eta delta J1(2 Omega / delta)
        target = 2.0 * force
        x_star, peak = sdf_speed_limit(params.eta, delta)
        if target > peak:
            logger.warning(
                f"Required force {target:.4e} rad/s exceeds the traveling-wave limit {peak:.4e} rad/s"
            )
            return float("nan")
        x = brentq(lambda v: params.eta * delta * jv(1, v) - target, 1e-12, x_star, xtol=1e-14)
        return 0.5 * x * delta


class SWSidebandModel(SWGateModel):
    """Lamb-Dicke standing wave with the carrier term removed; isolates sideband modulation."""

    name = "sw_ms_sideband"

    def hamiltonian(self, params: PhysParams, space: SpaceDescriptor) -> TimedOperator:
        return h_sw_ms(params, space, variant="lamb_dicke", carrier=False)


def get_gate_model(name: str = "sw_ms") -> GateModel:
    """
    Factory function to get the gate model for a scheme name.

    Args:
        name: "sw_ms", "tw_ms" or "sw_ms_sideband"

    Returns:
        An instance of the matching GateModel subclass

    Raises:
        ValueError: If the scheme is unknown
    """
    if name.lower() == "sw_ms":
        return SWGateModel()
    elif name.lower() == "tw_ms":
        return TWGateModel()
    elif name.lower() == "sw_ms_sideband":
        return SWSidebandModel()
    else:
        raise ValueError(f"Unsupported gate model: {name}")
