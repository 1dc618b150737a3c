import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

import presets as preset_store
from app.config import get_settings
from app.exceptions import NumericalError
from app.models import RunConfig
from app.services.experiments import ExperimentRunner
from app.utils.helpers import apply_overrides

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Get settings
settings = get_settings()

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def presets() -> Dict[str, str]:
    """
    Listing of the shipped presets.

    Returns:
        Mapping of preset name to the experiment it runs
    """
    return {name: config["experiment"] for name, config in preset_store.PRESETS.items()}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="run.py", description=f"{settings.APP_TITLE}: {settings.APP_DESCRIPTION}")
    parser.add_argument("--config", type=Path, help="RunConfig JSON file")
    parser.add_argument("--preset", help="Named preset used as the base config")
    parser.add_argument("--list-presets", action="store_true", help="Print the presets and exit")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes (0 = logical cores)")
    parser.add_argument("--seed", type=int, default=None, help="Random seed")
    parser.add_argument("--output-dir", default=None, help="Directory for CSV and summary files")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="Logging level")
    return parser


def merge_config(base: Dict, update: Dict) -> Dict:
    """Recursively merge update into a copy of base; sections merge, other values replace."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(args: argparse.Namespace, overrides: List[str]) -> RunConfig:
    """
    Assemble and validate the run configuration.

    Precedence: preset, then config file, then --seed/--output-dir, then dotted overrides.

    Raises:
        ValueError: If the config is missing, unreadable or invalid
    """
    raw: Dict = {}
    if args.preset:
        raw = preset_store.get_preset(args.preset)
    if args.config:
        try:
            with open(args.config) as handle:
                loaded = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ValueError(f"Cannot read config {args.config}: {e}")
        raw = merge_config(raw, loaded)
    if not raw:
        raise ValueError("Provide --config or --preset")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output_dir is not None:
        raw["output_dir"] = args.output_dir
    raw.setdefault("output_dir", settings.OUTPUT_DIR)
    apply_overrides(raw, overrides)
    return RunConfig.model_validate(raw)


def log_progress(done: int, total: int):
    """Log sweep progress roughly every tenth of the points."""
    if total and (done == total or done % max(1, total // 10) == 0):
        logger.info(f"Progress: {done}/{total} points ({100.0 * done / total:.0f}%)")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Command-line entry point.

    Returns:
        0 on success, 2 on validation errors, 3 on numerical failures
    """
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.getLogger().setLevel(args.log_level.upper())

    if args.list_presets:
        for name, experiment in presets().items():
            print(f"{name:<12} {experiment}")
        return EXIT_OK

    overrides = [item for item in extra if item.startswith("--") and "=" in item]
    unknown = [item for item in extra if item not in overrides]
    if unknown:
        logger.error(f"Unrecognized arguments: {' '.join(unknown)}")
        return EXIT_VALIDATION

    try:
        config = load_config(args, overrides)
    except (ValidationError, ValueError) as e:
        logger.error(f"Validation error: {str(e)}")
        return EXIT_VALIDATION

    jobs = args.jobs if args.jobs is not None else settings.DEFAULT_JOBS
    runner = ExperimentRunner(jobs=jobs, progress_callback=log_progress)
    try:
        summary = runner.run(config)
    except NumericalError as e:
        logger.error(f"Numerical failure: {str(e)}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Validation error: {str(e)}")
        return EXIT_VALIDATION

    if config.experiment == "error-budget":
        print((Path(config.output_dir) / "error-budget.txt").read_text(), end="")
    logger.info(f"Results: {json.dumps(summary['results'], default=str)}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
