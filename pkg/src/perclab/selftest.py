"""
Acceptance suites run by `perc-lab selftest`: exact invariants and oracle agreements on
small seeded samples.
"""

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .connectivity import Color, QuadSpec, check_duality, crossing, raster_crossing
from .estimators import estimate_crossing
from .geometry import build_index, nearest_point
from .pivotal import explore_crossing
from .project_logger import getLastLogEntries, getMainLogger
from .randomness import SeedSpec, StreamRole, derive_stream
from .regions import rectangle
from .runner import SampleRunner
from .sampling import Environment, Window, sample_coloring, sample_environment

_logger = getMainLogger()


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str
    wall_seconds: float = 0.0


def _samples(seed: SeedSpec, rect, n: int):
    window = Window.around(rect)
    for i in range(n):
        env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
        config = sample_coloring(env, 0.5, derive_stream(seed, i, StreamRole.COLOR))
        yield config, build_index(env)


def _duality(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    rect = rectangle(0, 0, 16, 8)
    ok = sum(check_duality(c, idx, rect) for c, idx in _samples(seed, rect, n))
    return ok == n, f"{ok}/{n} samples self-dual"


def _exploration(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    rect = rectangle(0, 0, 16, 8)
    quad = QuadSpec.left_right(rect, Color.BLACK)
    agree = sum(
        explore_crossing(c, idx, rect)[0] == crossing(c, idx, quad).holds
        for c, idx in _samples(seed, rect, n)
    )
    return agree == n, f"{agree}/{n} samples agree with the direct crossing"


def _raster(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    rect = rectangle(0, 0, 32, 32)
    quad = QuadSpec.left_right(rect, Color.BLACK)
    agree = sum(
        raster_crossing(c, quad, Color.BLACK, resolution) == crossing(c, idx, quad).holds
        for c, idx in _samples(seed, rect, n)
    )
    return agree >= 0.995 * n or n - agree <= 1, f"{agree}/{n} samples agree with the raster oracle"


def _cocircular(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    env = Environment.explicit(square, Window(x_min=-1, x_max=2, y_min=-1, y_max=2))
    edges = build_index(env).delaunay_edges
    has_diagonal = (edges == [0, 2]).all(axis=1).any()
    return len(edges) == 5 and bool(has_diagonal), f"{len(edges)} Delaunay edges on a unit square"


def _nearest(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    window = Window(x_min=0, x_max=10, y_min=0, y_max=10, padding=1)
    env = sample_environment(window, derive_stream(seed, 0, StreamRole.ENVIRONMENT))
    index = build_index(env)
    locs = derive_stream(seed, 0, StreamRole.AUXILIARY).random((20 * n, 2)) * 10
    scan = np.argmin(((env.points[None] - locs[:, None]) ** 2).sum(axis=-1), axis=1)
    agree = sum(nearest_point(index, loc) == k for loc, k in zip(locs, scan))
    return agree == len(locs), f"{agree}/{len(locs)} nearest-point queries match a linear scan"


def _determinism(n: int, resolution: float, seed: SeedSpec, runner: SampleRunner) -> tuple[bool, str]:
    quad = QuadSpec.left_right(rectangle(0, 0, 8, 4))
    k = min(n, 20)
    inline = estimate_crossing(0.5, quad, k, seed, SampleRunner(1))
    pooled = estimate_crossing(0.5, quad, k, seed, runner)
    same = (inline.value, inline.stderr) == (pooled.value, pooled.stderr)
    return same, f"inline {inline.value!r} vs {runner.workers} worker(s) {pooled.value!r}"


SUITES: dict[str, Callable] = {
    "duality": _duality,
    "exploration": _exploration,
    "raster-oracle": _raster,
    "cocircular-delaunay": _cocircular,
    "nearest-point": _nearest,
    "determinism": _determinism,
}


def run_selftest(
    n: int, resolution: float, seed: SeedSpec, runner: SampleRunner
) -> list[SuiteResult]:
    """
    Run every suite; a suite raising an exception counts as failed
    """
    results = []
    for name, suite in SUITES.items():
        start = time.perf_counter()
        try:
            passed, detail = suite(n, resolution, seed.child(name), runner)
        except Exception as err:
            passed, detail = False, f"error: {err}"
        wall = time.perf_counter() - start
        if passed:
            _logger.info(f"Selftest [{name}] passed: {detail}")
        else:
            _logger.error(f"Selftest [{name}] FAILED: {detail}")
            for line in getLastLogEntries(5):
                _logger.debug(f"  context: {line}")
        results.append(SuiteResult(name, passed, detail, wall))
    return results
