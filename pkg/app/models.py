import math
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from app.config import get_settings

TWO_PI = 2.0 * math.pi

# Hilbert space models
class SpaceDescriptor(BaseModel):
    """Composite space of n two-level spins and one truncated oscillator."""
    model_config = ConfigDict(frozen=True)

    n_ions: int = Field(..., description="Number of spins (1 or 2)")
    fock_cutoff: int = Field(..., description="Highest retained Fock index N", ge=1)

    @field_validator("n_ions")
    @classmethod
    def check_ion_count(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError(f"n_ions must be 1 or 2, got {value}")
        return value

    @computed_field
    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @computed_field
    @property
    def dim(self) -> int:
        return 2 ** self.n_ions * (self.fock_cutoff + 1)


class OperatorMatrix(BaseModel):
    """Dense operator on a SpaceDescriptor."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: SpaceDescriptor
    entries: np.ndarray
    hamiltonian: bool = False

    @model_validator(mode="after")
    def check_shape(self) -> "OperatorMatrix":
        if self.entries.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"Operator shape {self.entries.shape} does not match dim {self.space.dim}")
        if self.hamiltonian and np.max(np.abs(self.entries - self.entries.conj().T)) > 1e-12:
            raise ValueError("Operator flagged as hamiltonian is not Hermitian")
        return self

    def dagger(self) -> "OperatorMatrix":
        return OperatorMatrix(space=self.space, entries=self.entries.conj().T, hamiltonian=self.hamiltonian)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(space=self.space, entries=self.entries @ other.entries)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(space=self.space, entries=self.entries + other.entries)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(space=self.space, entries=self.entries - other.entries)


class StateVector(BaseModel):
    """Normalized state on a SpaceDescriptor."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    space: SpaceDescriptor
    amplitudes: np.ndarray

    @model_validator(mode="after")
    def check_state(self) -> "StateVector":
        if self.amplitudes.shape != (self.space.dim,):
            raise ValueError(f"State length {self.amplitudes.shape} does not match dim {self.space.dim}")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"State is not normalized (norm {norm:.12f})")
        return self

    def populations(self) -> np.ndarray:
        """Probabilities arranged as (spin configuration, Fock level)."""
        return np.abs(self.amplitudes.reshape(2 ** self.space.n_ions, self.space.n_fock)) ** 2


# Physical models
class PhysParams(BaseModel):
    """Physical parameters of the light-ion interaction, all rates in rad/s."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    eta: float = Field(0.051, description="Lamb-Dicke factor", gt=0.0, le=0.5)
    omega_z: float = Field(TWO_PI * 1.2e6, description="Motional mode angular frequency", gt=0.0)
    delta: float = Field(0.0, description="Detuning from the qubit resonance")
    omega_rabi: float = Field(0.0, description="Single-beam Rabi frequency", ge=0.0)
    phi1: float = Field(0.0, description="Optical phase of beam b1")
    phi2: float = Field(0.0, description="Optical phase of beam b2")
    n_ions: int = Field(1, description="Number of ions")
    dphi_bd: float = Field(0.0, description="Phase offset of the blue-detuned standing wave")
    dphi_rd: float = Field(0.0, description="Phase offset of the red-detuned standing wave")
    rabi_imbalance: float = Field(0.0, description="Rabi frequency difference between the beams")
    dphi_sp: float = Field(0.0, description="Ion spacing phase mismatch seen by the second ion")

    @field_validator("n_ions")
    @classmethod
    def check_ion_count(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError(f"n_ions must be 1 or 2, got {value}")
        return value

    @property
    def dphi(self) -> float:
        return self.phi1 - self.phi2

    @property
    def tilde_phi(self) -> float:
        return 0.5 * (self.phi1 + self.phi2 + math.pi)

    def with_dphi(self, dphi: float) -> "PhysParams":
        """Same beams with the relative phase set to dphi (carried by beam b1)."""
        return self.model_copy(update={"phi1": self.phi2 + dphi})


class PulseEnvelope(BaseModel):
    """Amplitude shape g(t) with sin^2 ramps or a square profile."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_ramp: float = Field(0.0, description="Ramp duration t_R in seconds", ge=0.0)
    t_total: float = Field(..., description="Total pulse duration t_f in seconds", gt=0.0)
    shape: Literal["sin2_ramp", "square"] = "sin2_ramp"

    @model_validator(mode="after")
    def check_ramps(self) -> "PulseEnvelope":
        if 2.0 * self.t_ramp > self.t_total * (1.0 + 1e-12):
            raise ValueError(f"Ramps (2 x {self.t_ramp}) exceed the pulse duration {self.t_total}")
        return self


class IntegratorConfig(BaseModel):
    """Step control of the evolution engine."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt_init: Optional[float] = Field(None, description="Initial step; derived from the fastest rate when unset", gt=0.0)
    tol: float = Field(
        default_factory=lambda: get_settings().INTEGRATOR_TOL, description="Step-halving acceptance tolerance", gt=0.0
    )
    max_refinements: int = Field(
        default_factory=lambda: get_settings().MAX_REFINEMENTS, description="Maximum number of step halvings", ge=0
    )


# Result models
class ScanResult(BaseModel):
    """Tabulated sweep output."""

    axis_name: str
    axis_values: List[float]
    series: Dict[str, List[float]]
    probability_series: List[str] = Field(default_factory=list)
    metadata: Dict[str, object] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_series(self) -> "ScanResult":
        n = len(self.axis_values)
        for name, values in self.series.items():
            if len(values) != n:
                raise ValueError(f"Series '{name}' has {len(values)} values, axis has {n}")
        for name in self.probability_series:
            values = np.asarray(self.series[name], dtype=float)
            if np.any(values < -1e-9) or np.any(values > 1.0 + 1e-9):
                raise ValueError(f"Series '{name}' leaves the probability range")
        return self

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name], dtype=float)


class GateResult(BaseModel):
    """Optimized gate at one effective duration."""

    t_gate_eff: float
    delta_g: float = Field(..., gt=0.0)
    omega_star: float
    fidelity: float = Field(..., ge=0.0, le=1.0)
    rel_power: Optional[float] = None


ErrorSource = Literal[
    "visibility_carrier",
    "phase_carrier",
    "phase_sideband",
    "ion_spacing_carrier",
    "bichromatic_mismatch",
]


class ErrorBudgetRow(BaseModel):
    """One line of the standing-wave gate error budget."""

    source: ErrorSource
    fluctuation: float
    unit: str
    eps_square: float = Field(..., ge=0.0)
    eps_shaped: float = Field(..., ge=0.0)
    operating_point: Optional[float] = Field(None, description="2*Omega/delta used for the row")

    @model_validator(mode="after")
    def check_shaping(self) -> "ErrorBudgetRow":
        if self.eps_shaped > self.eps_square * (1.0 + 1e-9):
            raise ValueError(f"Shaped error exceeds square error for {self.source}")
        return self


class BudgetFluctuations(BaseModel):
    """Fluctuation magnitudes entering the error budget."""
    model_config = ConfigDict(extra="forbid")

    visibility: float = Field(0.05, description="Relative imbalance dOmega/Omega", ge=0.0)
    sigma_phi: float = Field(0.12, description="rms SW phase jitter (rad)", ge=0.0)
    dphi_sp: float = Field(0.033, description="Ion spacing mismatch (rad)", ge=0.0)
    dphi_bi: float = Field(0.042, description="Bichromatic phase misalignment (rad)", ge=0.0)


# Phase lock models
class LockConfig(BaseModel):
    """Two-loop phase stabilization simulation settings."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    drift_rate: float = Field(0.1, description="Path-length phase random walk (rad/sqrt(s))", ge=0.0)
    pd_offset_drift: float = Field(0.1, description="PD-to-ion offset random walk (rad/sqrt(s))", ge=0.0)
    pd_residual: float = Field(0.02, description="rms residual of the photodiode loop per shot (rad)", ge=0.0)
    m_feedback_shots: int = Field(100, ge=1)
    n_main_shots: int = Field(100, ge=1)
    shot_period: float = Field(5e-3, gt=0.0)
    duration: float = Field(3600.0, gt=0.0)
    rng_seed: int = 0
    ion_feedback: bool = True


class LockTrace(BaseModel):
    """Phase at the ion recorded during main-sequence shots."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    times: np.ndarray
    dphi: np.ndarray
    rms: float

    @model_validator(mode="after")
    def check_rms(self) -> "LockTrace":
        expected = float(np.sqrt(np.mean(self.dphi ** 2))) if self.dphi.size else 0.0
        if not math.isclose(self.rms, expected, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("rms does not match the recorded phases")
        return self


class HistogramFit(BaseModel):
    """Binned phase samples with a Gaussian fit."""

    counts: List[int]
    edges: List[float]
    mean: float
    sigma: float = Field(..., gt=0.0)
    ks_pvalue: float = Field(..., ge=0.0, le=1.0)
    non_gaussian: bool

    @model_validator(mode="after")
    def check_bins(self) -> "HistogramFit":
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("Histogram needs one more edge than bins")
        return self


# Run configuration
Experiment = Literal[
    "phase-scan",
    "detuning-scan",
    "sdf-curve",
    "gate-fidelity",
    "power-curve",
    "error-budget",
    "lock-sim",
    "calibrate-spacing",
    "calibrate-bichromatic",
]


class EnvelopeConfig(BaseModel):
    """Envelope fields of a run; the total duration follows from the experiment when unset."""
    model_config = ConfigDict(extra="forbid")

    t_ramp: float = Field(10e-6, ge=0.0)
    t_total: Optional[float] = Field(None, gt=0.0)
    shape: Literal["sin2_ramp", "square"] = "sin2_ramp"


class RunOptions(BaseModel):
    """Experiment-specific knobs."""
    model_config = ConfigDict(extra="forbid")

    n_ions: int = 1
    placement: Literal["node", "antinode"] = "node"
    resonance: Literal["carrier", "sideband"] = "carrier"
    scan_points: int = Field(73, ge=3)
    x_values: List[float] = Field(default_factory=lambda: [0.2, 0.6, 1.0, 1.5, 2.0, 2.5, 3.0])
    durations: List[float] = Field(default_factory=lambda: [15e-6, 20e-6, 30e-6, 40e-6, 60e-6])
    models: List[Literal["sw_ms", "tw_ms"]] = Field(default_factory=lambda: ["sw_ms", "tw_ms"])
    grid_points: int = Field(40, ge=3)
    fock_cutoff: Optional[int] = Field(None, ge=1)
    delta_g: float = Field(TWO_PI / 15e-6, gt=0.0)
    shots: int = Field(100, ge=1)
    noise: bool = True
    fluctuations: BudgetFluctuations = Field(default_factory=BudgetFluctuations)
    operating_point: Optional[float] = Field(None, gt=0.0)
    suppression_ratio: Optional[float] = Field(None, ge=0.0)
    lock: LockConfig = Field(default_factory=LockConfig)
    histogram_bins: int = Field(41, ge=5)


class RunConfig(BaseModel):
    """Validated run configuration read from JSON."""
    model_config = ConfigDict(extra="forbid")

    experiment: Experiment
    params: PhysParams = Field(default_factory=PhysParams)
    envelope: EnvelopeConfig = Field(default_factory=EnvelopeConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    options: RunOptions = Field(default_factory=RunOptions)
    output_dir: str = "results"
    seed: int = 0
