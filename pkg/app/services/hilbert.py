"""
Composite spin x oscillator Hilbert space.

Basis ordering is spin-major, Fock-minor. For each spin |down> has index 0
and |up> index 1, with sigma_plus = |up><down|; ion 1 is the most significant
spin factor.
"""

import logging
from functools import lru_cache
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from app.config import get_settings
from app.models import OperatorMatrix, SpaceDescriptor, StateVector

# Configure logging
logger = logging.getLogger(__name__)

SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)


def build_space(n_ions: int, fock_cutoff: int) -> SpaceDescriptor:
    """
    Build the descriptor of n spins and one mode truncated at fock_cutoff.

    Raises:
        ValueError: If n_ions is not 1 or 2, or fock_cutoff < 1
    """
    return SpaceDescriptor(n_ions=n_ions, fock_cutoff=fock_cutoff)


def resolve_cutoff(fock_cutoff: Optional[int] = None) -> int:
    """Requested Fock cutoff, or the configured FOCK_CUTOFF when unset."""
    return fock_cutoff or get_settings().FOCK_CUTOFF


def single_spin(kind: Literal["plus", "minus", "phi"], phase: float = 0.0) -> np.ndarray:
    """2x2 spin matrix; 'phi' is sigma_x cos(phase) + sigma_y sin(phase)."""
    if kind == "plus":
        return SIGMA_PLUS
    if kind == "minus":
        return SIGMA_MINUS
    if kind == "phi":
        return np.exp(1j * phase) * SIGMA_PLUS + np.exp(-1j * phase) * SIGMA_MINUS
    raise ValueError(f"Unknown spin operator kind: {kind}")


def ion_spin(n_ions: int, ion: int, op: np.ndarray) -> np.ndarray:
    """Place a 2x2 operator on one ion of the spin register."""
    out = np.ones((1, 1), dtype=complex)
    for i in range(n_ions):
        out = np.kron(out, op if i == ion else np.eye(2, dtype=complex))
    return out


def collective_spin(n_ions: int, op: np.ndarray) -> np.ndarray:
    """Sum of a 2x2 operator over all ions, on the spin register only."""
    return sum(ion_spin(n_ions, i, op) for i in range(n_ions))


def embed(spin_part: np.ndarray, mode_part: np.ndarray) -> np.ndarray:
    """Tensor product spin x motion in the composite ordering."""
    return np.kron(spin_part, mode_part)


def spin_op(space: SpaceDescriptor, kind: Literal["plus", "minus", "phi"], phase: float = 0.0) -> OperatorMatrix:
    """Collective spin operator sum_i sigma_kind^(i) (x) 1_motion."""
    entries = embed(collective_spin(space.n_ions, single_spin(kind, phase)), np.eye(space.n_fock))
    return OperatorMatrix(space=space, entries=entries, hamiltonian=(kind == "phi"))


def annihilation(n_fock: int) -> np.ndarray:
    """Truncated annihilation operator on the mode alone."""
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1).astype(complex)


def mode_ops(space: SpaceDescriptor) -> Tuple[OperatorMatrix, OperatorMatrix]:
    """Mode operators a and a_dagger embedded as 1_spin (x) (.)."""
    a = embed(np.eye(2 ** space.n_ions), annihilation(space.n_fock))
    return (
        OperatorMatrix(space=space, entries=a),
        OperatorMatrix(space=space, entries=a.conj().T.copy()),
    )


@lru_cache(maxsize=64)
def _quadrature_eigensystem(n_fock: int, eta: float) -> Tuple[np.ndarray, np.ndarray]:
    a = annihilation(n_fock)
    x = eta * (a + a.conj().T)
    values, vectors = eigh(x)
    return values, vectors


def quadrature_function(space: SpaceDescriptor, eta: float, kind: Literal["sin", "cos", "exp"]) -> np.ndarray:
    """
    Mode matrix f(eta (a + a_dagger)) by exact diagonalization of the quadrature.

    Args:
        space: The composite space (only its cutoff is used)
        eta: Lamb-Dicke factor
        kind: 'sin', 'cos' or 'exp' (the latter is exp(i eta (a + a_dagger)))

    Returns:
        (N+1) x (N+1) complex matrix on the mode alone
    """
    values, vectors = _quadrature_eigensystem(space.n_fock, float(eta))
    if kind == "sin":
        diag = np.sin(values)
    elif kind == "cos":
        diag = np.cos(values)
    elif kind == "exp":
        diag = np.exp(1j * values)
    else:
        raise ValueError(f"Unknown quadrature function: {kind}")
    out = (vectors * diag) @ vectors.conj().T
    # odd functions only connect levels of opposite parity, even ones the same parity
    n = np.arange(space.n_fock)
    odd_gap = (n[:, None] - n[None, :]) % 2 == 1
    if kind == "sin":
        out[~odd_gap] = 0.0
    elif kind == "cos":
        out[odd_gap] = 0.0
    return out


def fock_offsets(space: SpaceDescriptor) -> np.ndarray:
    """Matrix of n_row - n_col over the composite basis (drives the mode rotation)."""
    n = np.tile(np.arange(space.n_fock), 2 ** space.n_ions)
    return (n[:, None] - n[None, :]).astype(float)


def basis_state(space: SpaceDescriptor, spins: Sequence[int], fock: int = 0) -> StateVector:
    """Product state |spins> (x) |fock>, with spin value 1 meaning |up>."""
    if len(spins) != space.n_ions:
        raise ValueError(f"Expected {space.n_ions} spin labels, got {len(spins)}")
    if not 0 <= fock <= space.fock_cutoff:
        raise ValueError(f"Fock level {fock} outside the truncated space")
    index = 0
    for s in spins:
        index = 2 * index + int(s)
    amplitudes = np.zeros(space.dim, dtype=complex)
    amplitudes[index * space.n_fock + fock] = 1.0
    return StateVector(space=space, amplitudes=amplitudes)


def product_state(space: SpaceDescriptor, spin_vector: np.ndarray, fock: int = 0) -> StateVector:
    """Arbitrary spin-register vector times a Fock state."""
    mode = np.zeros(space.n_fock, dtype=complex)
    mode[fock] = 1.0
    amplitudes = np.kron(np.asarray(spin_vector, dtype=complex), mode)
    return StateVector(space=space, amplitudes=amplitudes / np.linalg.norm(amplitudes))


def embed_state(psi: StateVector, new_space: SpaceDescriptor) -> StateVector:
    """Zero-pad a state into a space with a larger Fock cutoff."""
    if new_space.n_ions != psi.space.n_ions or new_space.fock_cutoff < psi.space.fock_cutoff:
        raise ValueError("Target space must have the same spins and an equal or larger cutoff")
    grid = np.zeros((2 ** new_space.n_ions, new_space.n_fock), dtype=complex)
    grid[:, : psi.space.n_fock] = psi.amplitudes.reshape(2 ** psi.space.n_ions, psi.space.n_fock)
    return StateVector(space=new_space, amplitudes=grid.reshape(-1))


def top_fock_population(space: SpaceDescriptor, amplitudes: np.ndarray) -> float:
    """Population in Fock levels {N-1, N}; columns of a matrix are treated as separate states."""
    grid = np.asarray(amplitudes).reshape(2 ** space.n_ions, space.n_fock, -1)
    return float(np.max(np.sum(np.abs(grid[:, -2:, :]) ** 2, axis=(0, 1))))


def reduced_spin_density(psi: StateVector) -> np.ndarray:
    """Spin density matrix with the motion traced out."""
    grid = psi.amplitudes.reshape(2 ** psi.space.n_ions, psi.space.n_fock)
    return grid @ grid.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a
