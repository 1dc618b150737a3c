import logging
import time
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from app.models import RunConfig, ScanResult
from app.services import calibration, error_budget, gates, phase_lock
from app.services.gate_models import get_gate_model
from app.services.hamiltonians import bessel_identity_residual, sdf_speed_limit
from app.services.sweeps import ProgressCallback, point_seeds
from app.utils.helpers import format_time, version_string, write_csv, write_summary, write_table

# Configure logging
logger = logging.getLogger(__name__)


class ExperimentRunner:
    """
    Service for running one configured experiment and writing its data
    (<experiment>.csv) and provenance (<experiment>.summary.json).
    """

    def __init__(self, jobs: Optional[int] = None, progress_callback: Optional[ProgressCallback] = None):
        """
        Initialize the runner.

        Args:
            jobs: Worker count for scans (0 means one per logical core)
            progress_callback: Optional callback receiving (done, total) per sweep point
        """
        self.jobs = jobs
        self.progress_callback = progress_callback

    def run(self, config: RunConfig, output_dir: Optional[str] = None) -> Dict[str, Any]:
        """
        Run an experiment and write its outputs.

        Args:
            config: Validated run configuration
            output_dir: Overrides config.output_dir

        Returns:
            The summary written to <experiment>.summary.json

        Raises:
            ValueError: For invalid parameter combinations
            NumericalError: If the numerics fail
        """
        started = time.perf_counter()
        target = Path(output_dir or config.output_dir)
        target.mkdir(parents=True, exist_ok=True)
        logger.info(f"Running {config.experiment} into {target}")

        try:
            handler = getattr(self, "_" + config.experiment.replace("-", "_"))
            scan, results, extra = handler(config)
        except Exception as e:
            logger.error(f"Error in {config.experiment}: {str(e)}")
            raise

        if scan is not None:
            write_csv(target / f"{config.experiment}.csv", scan)
        for suffix, (kind, payload) in extra.items():
            path = target / f"{config.experiment}{suffix}"
            if kind == "text":
                path.write_text(payload + "\n")
            elif kind == "table":
                write_table(path, *payload)
            else:
                write_csv(path, payload)

        wall_time = time.perf_counter() - started
        summary = {
            "experiment": config.experiment,
            "version": version_string(),
            "wall_time_s": wall_time,
            "config": config.model_dump(mode="json"),
            "results": results,
        }
        write_summary(target / f"{config.experiment}.summary.json", summary)
        logger.info(f"{config.experiment} finished in {format_time(wall_time)}")
        return summary

    # Experiments return (scan or None, results, {suffix: (kind, payload)})

    def _phase_scan(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        scan = gates.phase_scan(
            config.params, o.n_ions, o.scan_points, o.fock_cutoff, config.integrator, self.jobs, self.progress_callback
        )
        return scan, dict(scan.metadata), {}

    def _detuning_scan(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        scan = gates.detuning_scan(
            config.params, o.placement, o.resonance, o.scan_points, None, o.fock_cutoff,
            config.integrator, self.jobs, self.progress_callback,
        )
        return scan, dict(scan.metadata), {}

    def _sdf_curve(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        scan = gates.sdf_curve(
            config.params, o.x_values, config.envelope.t_ramp, o.fock_cutoff, config.integrator,
            self.jobs, self.progress_callback,
        )
        x_star, peak = sdf_speed_limit(config.params.eta, config.params.omega_z)
        tw_error = np.abs(scan.column("sdf_tw_norm") / scan.column("sdf_tw_analytic") - 1.0)
        sw_values = scan.column("sdf_sw_norm")
        results = {
            "speed_limit_x": x_star,
            "speed_limit_over_eta_delta": peak / (config.params.eta * config.params.omega_z),
            "bessel_identity_residual_max": max(bessel_identity_residual(x) for x in o.x_values),
            "tw_max_relative_error": float(tw_error.max()),
            "sw_relative_spread": float((sw_values.max() - sw_values.min()) / sw_values.mean()),
        }
        return scan, results, {}

    def _gate_fidelity(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        series: Dict[str, list] = {}
        for name in o.models:
            scan = gates.fidelity_vs_duration(
                get_gate_model(name), config.params, o.durations, config.envelope.t_ramp, config.envelope.shape,
                o.grid_points, o.fock_cutoff, config.integrator, self.jobs, self.progress_callback,
            )
            series[f"fidelity_{name}"] = scan.series["fidelity"]
            series[f"omega_star_{name}"] = scan.series["omega_star"]
            series[f"rel_power_{name}"] = scan.series["rel_power"]
        combined = ScanResult(
            axis_name="t_gate_eff_s",
            axis_values=list(o.durations),
            series=series,
            probability_series=[key for key in series if key.startswith("fidelity_")],
        )
        results = {key: min(values) for key, values in series.items() if key.startswith("fidelity_")}
        return combined, {"min_" + key: value for key, value in results.items()}, {}

    def _power_curve(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        scan = gates.power_curves(
            config.params, config.options.durations, config.envelope.t_ramp, config.envelope.shape
        )
        return scan, dict(scan.metadata), {}

    def _error_budget(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        rows, totals = error_budget.budget_table(
            config.params, o.fluctuations, o.delta_g, config.envelope.t_ramp, o.operating_point, o.suppression_ratio
        )
        rendered = error_budget.render_budget(rows, totals)
        header = ["source", "fluctuation", "unit", "eps_square", "eps_shaped", "operating_point"]
        table = [
            [row.source, row.fluctuation, row.unit, row.eps_square, row.eps_shaped,
             row.operating_point if row.operating_point is not None else ""]
            for row in rows
        ]
        table.append(["total", "", "", totals["square"], totals["shaped"], ""])
        results = {
            "totals": totals,
            "operating_points": {row.source: row.operating_point for row in rows},
        }
        # the budget has a text key column, so it goes through the table writer
        return None, results, {".csv": ("table", (header, table)), ".txt": ("text", rendered)}

    def _lock_sim(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        both_seed, pd_seed = point_seeds(config.seed, 2)
        both = phase_lock.simulate_lock(o.lock.model_copy(update={"rng_seed": both_seed, "ion_feedback": True}))
        pd_only = phase_lock.simulate_lock(o.lock.model_copy(update={"rng_seed": pd_seed, "ion_feedback": False}))
        fit = phase_lock.histogram(both, o.histogram_bins)
        scan = ScanResult(axis_name="time_s", axis_values=both.times.tolist(), series={"dphi_rad": both.dphi.tolist()})
        results = {
            "rms_rad": both.rms,
            "fit_sigma_rad": fit.sigma,
            "fit_mean_rad": fit.mean,
            "ks_pvalue": fit.ks_pvalue,
            "non_gaussian": fit.non_gaussian,
            "pd_only_rms_rad": pd_only.rms,
            "lambda_fraction": phase_lock.lambda_fraction(both.rms),
        }
        centers = 0.5 * (np.array(fit.edges[1:]) + np.array(fit.edges[:-1]))
        hist = ScanResult(axis_name="dphi_rad", axis_values=centers.tolist(), series={"counts": [float(c) for c in fit.counts]})
        return scan, results, {".histogram.csv": ("scan", hist)}

    def _calibrate_spacing(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        scan = gates.phase_scan(
            config.params, 2, o.scan_points, o.fock_cutoff, config.integrator, self.jobs, self.progress_callback
        )
        if o.noise:
            scan = calibration.add_projection_noise(scan, o.shots, np.random.default_rng(config.seed))
        fitted = calibration.spacing_fit(scan)
        results = {"dphi_sp_injected": config.params.dphi_sp, "dphi_sp_fitted": fitted}
        return scan, results, {}

    def _calibrate_bichromatic(self, config: RunConfig) -> Tuple[Any, Dict[str, Any], Dict[str, Any]]:
        o = config.options
        rng = np.random.default_rng(config.seed)
        outcome = calibration.calibrate_tones(
            config.params, o.delta_g, o.scan_points, o.shots if o.noise else None, rng,
            o.fock_cutoff, config.integrator, self.jobs,
        )
        scans = outcome["scans"]
        combined = ScanResult(
            axis_name="dphi_rad",
            axis_values=scans["blue"].axis_values,
            series={f"p_flip_{name}": scans[name].series["p_flip"] for name in ("blue", "red", "blue_ref", "red_ref")},
        )
        results = {
            "dphi_bd_injected": config.params.dphi_bd,
            "dphi_rd_injected": config.params.dphi_rd,
            "dphi_bd_fitted": outcome["dphi_bd"],
            "dphi_rd_fitted": outcome["dphi_rd"],
        }
        return combined, results, {}
