"""
Interaction Hamiltonians of traveling and standing waves.

All operators are in angular-frequency units (hbar absorbed) and in the
interaction picture of the qubit and the motional mode. Every Hamiltonian is
stored as H(t) = K(t) + K(t)^dagger with

    K(t) = [sum_k a_k exp(-i nu_k t) M_k] o exp(i omega_z t (n_row - n_col))

where o is the elementwise product. The elementwise factor rotates any mode
matrix f(eta X) into f(eta X(t)) with X(t) = a exp(-i omega_z t) + h.c.,
which is exact in the truncated space because a_dagger a is diagonal.
"""

import logging
import math
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import jv

from app.models import OperatorMatrix, PhysParams, SpaceDescriptor
from app.services.hilbert import (
    annihilation,
    build_space,
    embed,
    fock_offsets,
    ion_spin,
    quadrature_function,
    resolve_cutoff,
    single_spin,
)

# Configure logging
logger = logging.getLogger(__name__)

Term = Tuple[complex, float, np.ndarray]


class TimedOperator:
    """Hermitian operator-valued function of time on a composite space."""

    def __init__(
        self,
        space: SpaceDescriptor,
        omega_z: float,
        terms: Sequence[Term],
        rate_scale: float,
        builder: Optional[Callable[[SpaceDescriptor], "TimedOperator"]] = None,
        label: str = "",
    ):
        """
        Args:
            space: The composite space the operator acts on
            omega_z: Mode frequency of the rotating frame
            terms: (amplitude, frequency, matrix) triples forming K(t)
            rate_scale: Fastest angular frequency in the problem (sets the default step)
            builder: Rebuilds the same operator on another space (Fock cutoff growth)
            label: Human-readable name used in logs
        """
        self.space = space
        self.omega_z = omega_z
        self.terms = list(terms)
        self.rate_scale = rate_scale
        self.builder = builder
        self.label = label
        dim = space.dim
        self._amps = np.array([t[0] for t in self.terms], dtype=complex)
        self._nus = np.array([t[1] for t in self.terms], dtype=float)
        if self.terms:
            self._mats = np.stack([np.asarray(t[2], dtype=complex) for t in self.terms])
        else:
            self._mats = np.zeros((0, dim, dim), dtype=complex)
        self._offsets = fock_offsets(space)

    def matrix(self, t: float) -> np.ndarray:
        """Dense H(t) as a numpy array."""
        coeffs = self._amps * np.exp(-1j * self._nus * t)
        k = np.tensordot(coeffs, self._mats, axes=1)
        if k.ndim == 0:
            k = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        k = k * np.exp(1j * self.omega_z * t * self._offsets)
        return k + k.conj().T

    def eval(self, t: float) -> OperatorMatrix:
        return OperatorMatrix(space=self.space, entries=self.matrix(t), hamiltonian=True)

    def rebuild(self, space: SpaceDescriptor) -> "TimedOperator":
        if self.builder is None:
            raise ValueError(f"Operator '{self.label}' cannot be rebuilt on a new space")
        return self.builder(space)

    def __add__(self, other: "TimedOperator") -> "TimedOperator":
        if other.space != self.space or other.omega_z != self.omega_z:
            raise ValueError("Operators live on different spaces or frames")
        builder = None
        if self.builder is not None and other.builder is not None:
            builder = _SumBuilder(self.builder, other.builder)
        return TimedOperator(
            space=self.space,
            omega_z=self.omega_z,
            terms=self.terms + other.terms,
            rate_scale=max(self.rate_scale, other.rate_scale),
            builder=builder,
            label=f"{self.label}+{other.label}",
        )


class _SumBuilder:
    """Picklable builder for the sum of two operators."""

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def __call__(self, space: SpaceDescriptor) -> TimedOperator:
        return self.left(space) + self.right(space)


def _rate_scale(params: PhysParams, delta: float) -> float:
    return max(params.omega_z, abs(delta), params.omega_rabi)


def _ion_phase_shift(params: PhysParams, ion: int) -> float:
    """Relative SW phase offset of an ion; the second ion carries the spacing mismatch."""
    return ion * params.dphi_sp


def h_tw(
    params: PhysParams,
    space: SpaceDescriptor,
    detuning: Optional[float] = None,
    phi1: Optional[float] = None,
) -> TimedOperator:
    """
    Single traveling beam, exact in eta:
    (Omega/2) exp(i(phi1 + eta X(t) - delta t)) S_plus + h.c.
    """
    delta = params.delta if detuning is None else detuning
    phase = params.phi1 if phi1 is None else phi1
    expo = quadrature_function(space, params.eta, "exp")
    terms: List[Term] = []
    for ion in range(space.n_ions):
        # a displacement of the ion by the spacing mismatch moves the b1 phase by half of it
        amp = 0.5 * params.omega_rabi * np.exp(1j * (phase + 0.5 * _ion_phase_shift(params, ion)))
        terms.append((amp, delta, embed(ion_spin(space.n_ions, ion, single_spin("plus")), expo)))
    return TimedOperator(
        space, params.omega_z, terms, _rate_scale(params, delta),
        builder=partial(h_tw, params, detuning=detuning, phi1=phi1), label="tw",
    )


def _sw_mode_matrix(params: PhysParams, sin_m: np.ndarray, cos_m: np.ndarray, dphi: float) -> np.ndarray:
    half = 0.5 * dphi
    main = params.omega_rabi * (sin_m * math.cos(half) + cos_m * math.sin(half))
    # beams carry Omega +- dOmega/2; the imbalance drives cos(eta X + dphi/2) in quadrature
    imbalance = -0.5j * params.rabi_imbalance * (cos_m * math.cos(half) - sin_m * math.sin(half))
    return main + imbalance


def h_sw_exact(
    params: PhysParams,
    space: SpaceDescriptor,
    detuning: Optional[float] = None,
    dphi: Optional[float] = None,
) -> TimedOperator:
    """
    Monochromatic standing wave without Lamb-Dicke truncation:
    Omega exp(i(phi~ - delta t)) S_plus [sin(eta X(t)) cos(dphi/2) + cos(eta X(t)) sin(dphi/2)] + h.c.
    """
    delta = params.delta if detuning is None else detuning
    base = params.dphi if dphi is None else dphi
    sin_m = quadrature_function(space, params.eta, "sin")
    cos_m = quadrature_function(space, params.eta, "cos")
    amp = np.exp(1j * params.tilde_phi)
    terms: List[Term] = []
    for ion in range(space.n_ions):
        mode = _sw_mode_matrix(params, sin_m, cos_m, base + _ion_phase_shift(params, ion))
        terms.append((amp, delta, embed(ion_spin(space.n_ions, ion, single_spin("plus")), mode)))
    return TimedOperator(
        space, params.omega_z, terms, _rate_scale(params, delta),
        builder=partial(h_sw_exact, params, detuning=detuning, dphi=dphi), label="sw_exact",
    )


def _quadrature(space: SpaceDescriptor) -> np.ndarray:
    a = annihilation(space.n_fock)
    return a + a.conj().T


def h_sw_ld(
    params: PhysParams,
    space: SpaceDescriptor,
    detuning: Optional[float] = None,
    dphi: Optional[float] = None,
) -> TimedOperator:
    """Lamb-Dicke form: first-sideband term ~ eta Omega cos(dphi/2) plus carrier ~ Omega sin(dphi/2)."""
    delta = params.delta if detuning is None else detuning
    base = params.dphi if dphi is None else dphi
    x = params.eta * _quadrature(space)
    one = np.eye(space.n_fock, dtype=complex)
    amp = np.exp(1j * params.tilde_phi)
    terms: List[Term] = []
    for ion in range(space.n_ions):
        mode = _sw_mode_matrix(params, x, one, base + _ion_phase_shift(params, ion))
        terms.append((amp, delta, embed(ion_spin(space.n_ions, ion, single_spin("plus")), mode)))
    return TimedOperator(
        space, params.omega_z, terms, _rate_scale(params, delta),
        builder=partial(h_sw_ld, params, detuning=detuning, dphi=dphi), label="sw_ld",
    )


def h_tw_ms(
    params: PhysParams,
    space: SpaceDescriptor,
    phi: float = 0.0,
    variant: str = "lamb_dicke",
) -> TimedOperator:
    """
    Bichromatic traveling wave:
    eta Omega S_phi cos(delta t) X(t) + Omega S_(phi - pi/2) cos(delta t).

    The 'exact' variant sums two single-beam operators at +-delta instead.
    """
    if variant == "exact":
        carrier_phase = phi - 0.5 * math.pi
        return h_tw(params, space, detuning=params.delta, phi1=carrier_phase) + h_tw(
            params, space, detuning=-params.delta, phi1=carrier_phase
        )
    if variant != "lamb_dicke":
        raise ValueError(f"Unknown Hamiltonian variant: {variant}")

    n = space.n_ions
    s_force = sum(ion_spin(n, i, single_spin("phi", phi)) for i in range(n))
    s_carrier = sum(ion_spin(n, i, single_spin("phi", phi - 0.5 * math.pi)) for i in range(n))
    m_force = embed(s_force, _quadrature(space))
    m_carrier = embed(s_carrier, np.eye(space.n_fock))
    terms: List[Term] = []
    for nu in (params.delta, -params.delta):
        terms.append((0.25 * params.eta * params.omega_rabi, nu, m_force))
        terms.append((0.25 * params.omega_rabi, nu, m_carrier))
    return TimedOperator(
        space, params.omega_z, terms, _rate_scale(params, params.delta),
        builder=partial(h_tw_ms, params, phi=phi, variant=variant), label="tw_ms",
    )


def h_sw_ms(
    params: PhysParams,
    space: SpaceDescriptor,
    variant: str = "lamb_dicke",
    carrier: bool = True,
) -> TimedOperator:
    """
    Bichromatic standing wave:
    2 eta Omega S_phi~ cos(delta t) X(t) cos(dphi/2) + 2 Omega S_phi~ cos(delta t) sin(dphi/2).

    The 'exact' variant composes two exact standing waves at +-delta whose
    relative phases carry the independent offsets dphi_bd and dphi_rd.
    """
    if variant == "exact":
        blue = h_sw_exact(params, space, detuning=params.delta, dphi=params.dphi + params.dphi_bd)
        red = h_sw_exact(params, space, detuning=-params.delta, dphi=params.dphi + params.dphi_rd)
        return blue + red
    if variant != "lamb_dicke":
        raise ValueError(f"Unknown Hamiltonian variant: {variant}")

    n = space.n_ions
    x = _quadrature(space)
    terms: List[Term] = []
    for ion in range(n):
        half = 0.5 * (params.dphi + _ion_phase_shift(params, ion))
        spin = ion_spin(n, ion, single_spin("phi", params.tilde_phi))
        m_force = embed(spin, x)
        m_carrier = embed(spin, np.eye(space.n_fock))
        for nu in (params.delta, -params.delta):
            terms.append((0.5 * params.eta * params.omega_rabi * math.cos(half), nu, m_force))
            if carrier:
                terms.append((0.5 * params.omega_rabi * math.sin(half), nu, m_carrier))
    return TimedOperator(
        space, params.omega_z, terms, _rate_scale(params, params.delta),
        builder=partial(h_sw_ms, params, variant=variant, carrier=carrier), label="sw_ms",
    )


def _single_ion_element(params: PhysParams, dphi: float, detuning: float, fock_out: int, fock_cutoff: int) -> complex:
    space = build_space(1, fock_cutoff)
    h = h_sw_exact(params.model_copy(update={"n_ions": 1}), space, detuning=detuning, dphi=dphi).matrix(0.0)
    return h[space.n_fock + fock_out, 0]


def carrier_rabi_frequency(params: PhysParams, fock_cutoff: Optional[int] = None) -> float:
    """Rabi frequency of |down,0> -> |up,0> at the standing-wave node (dphi = pi)."""
    return 2.0 * abs(_single_ion_element(params, math.pi, 0.0, 0, resolve_cutoff(fock_cutoff)))


def sideband_rabi_frequency(params: PhysParams, fock_cutoff: Optional[int] = None) -> float:
    """Rabi frequency of |down,0> -> |up,1> at the standing-wave anti-node (dphi = 0)."""
    return 2.0 * abs(_single_ion_element(params, 0.0, params.omega_z, 1, resolve_cutoff(fock_cutoff)))


def sdf_analytic(eta: float, omega_rabi: float, delta: float) -> float:
    """
    Spin-dependent force of a bichromatic traveling wave dressed by its carrier.

    Returns:
        eta Omega [J0(2 Omega/delta) + J2(2 Omega/delta)]
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    x = 2.0 * omega_rabi / delta
    return float(eta * omega_rabi * (jv(0, x) + jv(2, x)))


def bessel_identity_residual(x: float) -> float:
    """|J0(x) + J2(x) - 2 J1(x)/x|."""
    return float(abs(jv(0, x) + jv(2, x) - 2.0 * jv(1, x) / x))


def sdf_speed_limit(eta: float, delta: float) -> Tuple[float, float]:
    """
    Location and value of the largest attainable traveling-wave force.

    Using J0 + J2 = 2 J1(x)/x the force is eta delta J1(x) with x = 2 Omega/delta.

    Returns:
        (x_star, omega_sdf_max)
    """
    res = minimize_scalar(lambda x: -jv(1, x), bounds=(0.5, 3.0), method="bounded", options={"xatol": 1e-10})
    x_star = float(res.x)
    return x_star, float(eta * delta * jv(1, x_star))
