import math
import os

import pytest

from app.services.sweeps import determine_chunk_size, map_points, point_seeds, resolve_jobs


@pytest.mark.parametrize(
    "total, jobs, expected",
    [(100, 4, 7), (1000, 2, 16), (0, 4, 1), (3, 8, 1)],
)
def test_determine_chunk_size(total, jobs, expected):
    assert determine_chunk_size(total, jobs) == expected


def test_resolve_jobs():
    assert resolve_jobs(3) == 3
    assert resolve_jobs(0) == (os.cpu_count() or 1)
    with pytest.raises(ValueError):
        resolve_jobs(-1)


def test_point_seeds_are_stable_and_distinct():
    seeds = point_seeds(7, 5)
    assert seeds == point_seeds(7, 5)
    assert len(set(seeds)) == 5
    # a point's seed does not depend on how many points follow it
    assert point_seeds(7, 3) == seeds[:3]
    assert point_seeds(8, 5) != seeds


def test_serial_map_reports_progress():
    calls = []
    results = map_points(lambda x: x * x, [3, 1, 2], jobs=1, progress_callback=lambda d, t: calls.append((d, t)))
    assert results == [9, 1, 4]
    assert calls == [(1, 3), (2, 3), (3, 3)]


def test_parallel_map_preserves_order():
    points = [float(i) for i in range(20)]
    calls = []
    results = map_points(math.sqrt, points, jobs=2, progress_callback=lambda d, t: calls.append(d))
    assert results == [math.sqrt(p) for p in points]
    assert calls[-1] == 20


def test_map_of_nothing():
    assert map_points(math.sqrt, [], jobs=4) == []
