import numpy as np
import pytest

from perclab.geometry import build_index
from perclab.process_mgmt import shutdown_event
from perclab.randomness import SeedSpec, StreamRole, derive_stream
from perclab.sampling import Configuration, Environment, Window, sample_coloring, sample_environment


def lattice(nx: int, ny: int, color_of=lambda i, j: -1, x0: float = 0.0, y0: float = 0.0):
    """
    Points at the centres of the unit squares of [x0, x0+nx] x [y0, y0+ny], window without padding,
    so every Voronoi cell is one unit square. Point (i, j) has index i * ny + j.
    """
    points = [(x0 + i + 0.5, y0 + j + 0.5) for i in range(nx) for j in range(ny)]
    colors = [color_of(i, j) for i in range(nx) for j in range(ny)]
    window = Window(x_min=x0, x_max=x0 + nx, y_min=y0, y_max=y0 + ny, padding=0.0)
    env = Environment.explicit(np.array(points), window)
    return Configuration.explicit(env, colors), build_index(env)


def point_index(i: int, j: int, ny: int) -> int:
    return i * ny + j


def seeded_samples(seed: SeedSpec, window: Window, n: int, p: float = 0.5):
    for i in range(n):
        env = sample_environment(window, derive_stream(seed, i, StreamRole.ENVIRONMENT))
        config = sample_coloring(env, p, derive_stream(seed, i, StreamRole.COLOR))
        yield config, build_index(env)


@pytest.fixture
def seed() -> SeedSpec:
    return SeedSpec(master_seed=12345, experiment_tag="tests")


@pytest.fixture(autouse=True)
def clear_shutdown():
    shutdown_event.clear()
    yield
    shutdown_event.clear()
