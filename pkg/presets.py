import copy
import math
from typing import Any, Dict

TWO_PI = 2.0 * math.pi

GATE_DURATIONS = [15e-6, 20e-6, 30e-6, 40e-6, 60e-6]

phase_scan_single = {
    "experiment": "phase-scan",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6, "omega_rabi": TWO_PI * 50e3},
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"n_ions": 1, "scan_points": 73},
}

phase_scan_pair = {
    "experiment": "phase-scan",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6, "omega_rabi": TWO_PI * 50e3},
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"n_ions": 2, "scan_points": 73},
}

detuning_scan = {
    "experiment": "detuning-scan",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6, "omega_rabi": TWO_PI * 50e3},
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"placement": "antinode", "resonance": "sideband", "scan_points": 73},
}

sdf_curve = {
    "experiment": "sdf-curve",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6},
    "envelope": {"t_ramp": 3.6e-6},
    "options": {"x_values": [0.2, 0.6, 1.0, 1.5, 2.0, 2.5, 3.0]},
}

gate_fidelity = {
    "experiment": "gate-fidelity",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6},
    "envelope": {"t_ramp": 10e-6, "shape": "sin2_ramp"},
    "options": {"durations": GATE_DURATIONS, "models": ["sw_ms", "tw_ms"], "grid_points": 40},
}

power_curve = {
    "experiment": "power-curve",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6},
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"durations": [15e-6, 20e-6, 25e-6, 30e-6, 40e-6, 50e-6, 60e-6]},
}

error_budget = {
    "experiment": "error-budget",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6},
    "envelope": {"t_ramp": 10e-6},
    "options": {
        "delta_g": TWO_PI / 15e-6,
        "fluctuations": {"visibility": 0.05, "sigma_phi": 0.12, "dphi_sp": 0.033, "dphi_bi": 0.042},
        "suppression_ratio": 1e-3,
    },
}

lock_sim = {
    "experiment": "lock-sim",
    "options": {
        "lock": {
            "drift_rate": 0.1,
            "pd_offset_drift": 0.1,
            "pd_residual": 0.02,
            "m_feedback_shots": 100,
            "n_main_shots": 100,
            "shot_period": 5e-3,
            "duration": 3600.0,
        },
        "histogram_bins": 41,
    },
}

calibrate_spacing = {
    "experiment": "calibrate-spacing",
    "params": {"eta": 0.051, "omega_z": TWO_PI * 1.2e6, "omega_rabi": TWO_PI * 50e3, "dphi_sp": 0.2},
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"scan_points": 73, "noise": True, "shots": 100},
}

calibrate_bichromatic = {
    "experiment": "calibrate-bichromatic",
    "params": {
        "eta": 0.051,
        "omega_z": TWO_PI * 1.2e6,
        "omega_rabi": TWO_PI * 300e3,
        "dphi_bd": 0.1,
        "dphi_rd": -0.05,
    },
    "envelope": {"t_ramp": 0.0, "shape": "square"},
    "options": {"scan_points": 72, "delta_g": TWO_PI / 15e-6, "noise": True, "shots": 100},
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "fig2a": phase_scan_single,
    "figB3": phase_scan_pair,
    "fig2b": detuning_scan,
    "fig3": sdf_curve,
    "fig4a": gate_fidelity,
    "fig4b": power_curve,
    "tableB1": error_budget,
    "figB1c": lock_sim,
    "spacing": calibrate_spacing,
    "bichromatic": calibrate_bichromatic,
}


def get_preset(name: str) -> Dict[str, Any]:
    """Deep copy of a named preset, safe to override."""
    if name not in PRESETS:
        raise ValueError(f"Unknown preset '{name}'. Available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
