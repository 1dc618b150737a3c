"""
Helper utilities for the gate simulator.

This module contains utility functions used across the application.
"""

import json
import logging
import subprocess
from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from app.config import get_settings
from app.models import ScanResult

# Configure logging
logger = logging.getLogger(__name__)


def gaussian_expectation(fn: Callable[[np.ndarray], np.ndarray], sigma: float, order: int = 64) -> float:
    """
    E[fn(x)] for x ~ Normal(0, sigma^2) by Gauss-Hermite quadrature.

    Args:
        fn: Vectorized function of the random variable
        sigma: Standard deviation
        order: Number of quadrature nodes

    Returns:
        The expectation value
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return float(fn(np.zeros(1))[0])
    nodes, weights = hermegauss(order)
    return float(np.sum(weights * fn(sigma * nodes)) / np.sqrt(2.0 * np.pi))


def parse_value(raw: str) -> Any:
    """Interpret a flag value as JSON where possible, falling back to the raw string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(config: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """
    Applies --key=value overrides with dotted paths to a nested config dict.

    Args:
        config: The raw config (modified in place)
        overrides: Items of the form "params.eta=0.06"

    Returns:
        The updated config

    Raises:
        ValueError: If an override is malformed or walks into a non-mapping
    """
    for item in overrides:
        key, sep, raw = item.lstrip("-").partition("=")
        if not sep or not key:
            raise ValueError(f"Malformed override '{item}', expected key=value")
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValueError(f"Override '{item}' does not address a nested section")
        node[parts[-1]] = parse_value(raw)
    return config


def float_format() -> str:
    digits = get_settings().CSV_SIGNIFICANT_DIGITS
    return f"%.{digits - 1}e"


def write_csv(path: Path, scan: ScanResult) -> Path:
    """
    Writes a scan as CSV with a single header row and scientific floats.

    Args:
        path: Target file
        scan: The tabulated result

    Returns:
        The written path
    """
    names = [scan.axis_name] + list(scan.series)
    table = np.column_stack([scan.axis_values] + [scan.series[name] for name in scan.series])
    np.savetxt(path, table, fmt=float_format(), delimiter=",", header=",".join(names), comments="")
    logger.info(f"Wrote {len(scan.axis_values)} rows to {path}")
    return path


def write_table(path: Path, header: List[str], rows: List[List[Any]]) -> Path:
    """Writes mixed text/number rows as CSV; numbers use the same format as write_csv."""
    fmt = float_format()
    cells = [[fmt % value if isinstance(value, (float, np.floating)) else str(value) for value in row] for row in rows]
    np.savetxt(path, np.array(cells, dtype=str), fmt="%s", delimiter=",", header=",".join(header), comments="")
    return path


def write_summary(path: Path, summary: Dict[str, Any]) -> Path:
    with open(path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def version_string() -> str:
    """git-describe style version, falling back to the configured version outside a checkout."""
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            capture_output=True,
            text=True,
            check=True,
            cwd=Path(__file__).resolve().parent,
        )
        return described.stdout.strip() or get_settings().APP_VERSION
    except (OSError, subprocess.CalledProcessError):
        return get_settings().APP_VERSION


def format_time(seconds: float) -> str:
    """
    Formats a wall time in seconds to a readable string (HH:MM:SS).

    Args:
        seconds: The time in seconds

    Returns:
        A formatted time string
    """
    hours = int(seconds // 3600)
    minutes = int((seconds % 3600) // 60)
    secs = int(seconds % 60)

    return f"{hours:02d}:{minutes:02d}:{secs:02d}"
