import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Optional, Sequence

import numpy as np

from app.config import get_settings

# Configure logging
logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int], None]


def resolve_jobs(jobs: Optional[int] = None) -> int:
    """Worker count; None falls back to the configured default and 0 means one per logical core."""
    if jobs is None:
        jobs = get_settings().DEFAULT_JOBS
    if jobs < 0:
        raise ValueError(f"jobs must be >= 0, got {jobs}")
    return jobs or (os.cpu_count() or 1)


def determine_chunk_size(
    total_points: int,
    jobs: int,
    chunks_per_worker: int = 4,
    min_chunk_size: int = 1,
    max_chunk_size: int = 16,
) -> int:
    """
    Determines the chunk size handed to each worker.

    Args:
        total_points: Number of independent sweep points
        jobs: Number of workers
        chunks_per_worker: Target number of chunks per worker
        min_chunk_size: The minimum chunk size
        max_chunk_size: The maximum chunk size

    Returns:
        The determined chunk size
    """
    ideal_chunk_size = math.ceil(total_points / max(1, jobs * chunks_per_worker))
    return max(min(ideal_chunk_size, max_chunk_size), min_chunk_size)


def point_seeds(seed: int, n_points: int) -> List[int]:
    """Independent per-point seeds so results do not depend on scheduling."""
    children = np.random.SeedSequence(seed).spawn(n_points)
    return [int(child.generate_state(1)[0]) for child in children]


def map_points(
    fn: Callable[[Any], Any],
    points: Sequence[Any],
    jobs: Optional[int] = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[Any]:
    """
    Evaluate fn on every point, preserving order.

    fn and the points must be picklable when more than one worker is used.

    Args:
        fn: Pure function of one point
        points: Sweep points
        jobs: Worker count (1 runs in-process)
        progress_callback: Called with (done, total) after every point

    Returns:
        Results in the order of points
    """
    total = len(points)
    workers = min(resolve_jobs(jobs), max(1, total))
    results: List[Any] = []

    if workers == 1:
        for point in points:
            results.append(fn(point))
            if progress_callback:
                progress_callback(len(results), total)
        return results

    chunk_size = determine_chunk_size(total, workers)
    logger.info(f"Evaluating {total} points on {workers} workers (chunk size {chunk_size})")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for result in executor.map(fn, points, chunksize=chunk_size):
            results.append(result)
            if progress_callback:
                progress_callback(len(results), total)
    return results
