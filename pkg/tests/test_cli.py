import json

import numpy as np

import presets as preset_store
from app.exceptions import ConvergenceError
from app.main import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main, presets
from app.services.experiments import ExperimentRunner


def run_cli(tmp_path, *args):
    return main(["--jobs", "1", "--output-dir", str(tmp_path), *args])


def test_presets_cover_every_experiment():
    listing = presets()
    assert set(listing.values()) == {
        "phase-scan", "detuning-scan", "sdf-curve", "gate-fidelity", "power-curve",
        "error-budget", "lock-sim", "calibrate-spacing", "calibrate-bichromatic",
    }
    assert preset_store.get_preset("fig4a")["envelope"]["t_ramp"] == 10e-6
    assert preset_store.get_preset("fig3")["envelope"]["t_ramp"] == 3.6e-6


def test_get_preset_returns_a_copy():
    preset = preset_store.get_preset("tableB1")
    preset["options"]["suppression_ratio"] = 0.5
    assert preset_store.PRESETS["tableB1"]["options"]["suppression_ratio"] == 1e-3


def test_list_presets(capsys):
    assert main(["--list-presets"]) == EXIT_OK
    assert "tableB1" in capsys.readouterr().out


def test_validation_failures(tmp_path):
    assert run_cli(tmp_path, "--preset", "fig3", "--params.eta=0.6") == EXIT_VALIDATION
    assert run_cli(tmp_path) == EXIT_VALIDATION
    assert run_cli(tmp_path, "--preset", "fig3", "--frobnicate") == EXIT_VALIDATION
    assert run_cli(tmp_path, "--preset", "nope") == EXIT_VALIDATION
    assert run_cli(tmp_path, "--preset", "fig3", "--options.colour=1") == EXIT_VALIDATION


def test_error_budget_run(tmp_path, capsys):
    assert run_cli(tmp_path, "--preset", "tableB1") == EXIT_OK
    assert "Total error" in capsys.readouterr().out

    lines = (tmp_path / "error-budget.csv").read_text().splitlines()
    assert lines[0] == "source,fluctuation,unit,eps_square,eps_shaped,operating_point"
    assert len(lines) == 7
    assert (tmp_path / "error-budget.txt").exists()

    summary = json.loads((tmp_path / "error-budget.summary.json").read_text())
    assert set(summary) == {"experiment", "version", "wall_time_s", "config", "results"}
    assert summary["experiment"] == "error-budget"
    assert summary["config"]["options"]["suppression_ratio"] == 1e-3


def test_power_curve_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run_cli(first, "--preset", "fig4b") == EXIT_OK
    assert run_cli(second, "--preset", "fig4b") == EXIT_OK
    assert (first / "power-curve.csv").read_bytes() == (second / "power-curve.csv").read_bytes()


def test_lock_sim_writes_histogram(tmp_path):
    assert run_cli(tmp_path, "--preset", "figB1c", "--options.lock.duration=60") == EXIT_OK
    header = (tmp_path / "lock-sim.histogram.csv").read_text().splitlines()[0]
    assert header.startswith("dphi_rad")
    results = json.loads((tmp_path / "lock-sim.summary.json").read_text())["results"]
    assert results["rms_rad"] <= results["pd_only_rms_rad"]


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def fail(self, config, output_dir=None):
        raise ConvergenceError("step halving exhausted", np.zeros(1), np.ones(1), 1.0)

    monkeypatch.setattr(ExperimentRunner, "run", fail)
    assert run_cli(tmp_path, "--preset", "fig4b") == EXIT_NUMERICAL


def test_config_file(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "experiment": "power-curve",
        "envelope": {"t_ramp": 0.0, "shape": "square"},
        "options": {"durations": [30e-6, 60e-6]},
    }))
    assert run_cli(tmp_path, "--config", str(config)) == EXIT_OK
    lines = (tmp_path / "power-curve.csv").read_text().splitlines()
    assert len(lines) == 3

    config.write_text(json.dumps({"experiment": "power-curve", "unknown": 1}))
    assert run_cli(tmp_path, "--config", str(config)) == EXIT_VALIDATION
    assert run_cli(tmp_path, "--config", str(tmp_path / "missing.json")) == EXIT_VALIDATION
