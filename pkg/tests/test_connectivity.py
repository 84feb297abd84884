import numpy as np
import pytest
from conftest import lattice, seeded_samples

from perclab.connectivity import (
    Color,
    QuadSpec,
    check_duality,
    crossing,
    disjoint_crossing_count,
    lengthwise_quads,
    raster_crossing,
    validate_witness,
)
from perclab.geometry import build_index, clip_to_region
from perclab.regions import rectangle, square_annulus
from perclab.sampling import Configuration, Environment, Window


def row(j0):
    return lambda i, j: 1 if j == j0 else -1


def column(i0):
    return lambda i, j: 1 if i == i0 else -1


def five_points(colors):
    """Black row (-2,0), (0,0), (2,0) capped by (0,2) and (0,-2)"""
    points = np.array([(-2, 0), (0, 0), (2, 0), (0, 2), (0, -2)], dtype=float)
    env = Environment.explicit(points, Window(x_min=-3, x_max=3, y_min=-3, y_max=3, padding=0))
    return Configuration.explicit(env, colors), build_index(env)


def test_five_point_crossing():
    config, index = five_points([1, 1, 1, -1, -1])
    rect = rectangle(-3, -1, 3, 1)
    black = QuadSpec.left_right(rect, Color.BLACK)
    white = QuadSpec.left_right(rect, Color.WHITE)
    assert crossing(config, index, black).holds
    assert not crossing(config, index, white).holds
    assert raster_crossing(config, black, Color.BLACK, 0.02)
    assert not raster_crossing(config, white, Color.WHITE, 0.02)


def test_five_point_crossing_flipped():
    config, index = five_points([-1, -1, -1, 1, 1])
    quad = QuadSpec.left_right(rectangle(-3, -1, 3, 1), Color.BLACK)
    assert not crossing(config, index, quad).holds
    assert not raster_crossing(config, quad, Color.BLACK, 0.02)


def test_color_enum():
    assert Color.BLACK.sign == 1
    assert Color.WHITE.sign == -1
    assert Color.BLACK.opposite == Color.WHITE
    assert Color("white") == Color.WHITE


def test_quad_sides_must_be_disjoint():
    rect = rectangle(0, 0, 4, 4)
    with pytest.raises(ValueError):
        QuadSpec(rect, "left", "left")
    with pytest.raises(ValueError, match="disjoint"):
        QuadSpec(rect, "left", "bottom")
    with pytest.raises(ValueError):
        QuadSpec(rect, "left", "inner")
    assert QuadSpec.bottom_top(rect).recolored(Color.WHITE).color == Color.WHITE


def test_black_row_crosses():
    config, index = lattice(4, 4, row(1))
    rect = rectangle(0, 0, 4, 4)
    quad = QuadSpec.left_right(rect)
    result = crossing(config, index, quad)
    assert result
    assert len(result.witness) == 4
    assert validate_witness(clip_to_region(index, rect), config.colors, quad, result.witness)
    assert not crossing(config, index, QuadSpec.bottom_top(rect))
    # the row blocks every white top-bottom path
    assert not crossing(config, index, QuadSpec.bottom_top(rect, Color.WHITE))
    assert crossing(config, index, QuadSpec.left_right(rect, Color.WHITE))


def test_black_column():
    config, index = lattice(4, 4, column(2))
    rect = rectangle(0, 0, 4, 4)
    assert crossing(config, index, QuadSpec.bottom_top(rect))
    assert not crossing(config, index, QuadSpec.left_right(rect))
    assert check_duality(config, index, rect)


def test_corner_contacts_do_not_connect():
    config, index = lattice(4, 4, lambda i, j: 1 if i == j else -1)
    rect = rectangle(0, 0, 4, 4)
    assert not crossing(config, index, QuadSpec.left_right(rect))
    assert not crossing(config, index, QuadSpec.bottom_top(rect))


def test_crossing_in_sub_rectangle():
    # a gap outside the query rectangle does not matter
    config, index = lattice(6, 3, lambda i, j: 1 if j == 1 and i != 5 else -1)
    assert crossing(config, index, QuadSpec.left_right(rectangle(0, 0, 5, 3)))
    assert not crossing(config, index, QuadSpec.left_right(rectangle(0, 0, 6, 3)))


def test_validate_witness_rejects_bad_paths():
    config, index = lattice(4, 4, row(1))
    rect = rectangle(0, 0, 4, 4)
    quad = QuadSpec.left_right(rect)
    cx = clip_to_region(index, rect)
    witness = crossing(config, index, quad).witness
    assert not validate_witness(cx, config.colors, quad, ())
    assert not validate_witness(cx, config.colors, quad, witness[:-1])
    assert not validate_witness(cx, config.colors, quad, (witness[0], witness[2], witness[3]))
    assert not validate_witness(cx, -config.colors, quad, witness)


def test_raster_oracle_on_lattice():
    config, index = lattice(4, 4, row(1))
    rect = rectangle(0, 0, 4, 4)
    quad = QuadSpec.left_right(rect)
    assert raster_crossing(config, quad, Color.BLACK, 0.1)
    assert not raster_crossing(config, QuadSpec.bottom_top(rect), Color.BLACK, 0.1)
    with pytest.raises(ValueError):
        raster_crossing(config, quad, Color.BLACK, 0.0)


def test_lengthwise_quads():
    black, white = lengthwise_quads(rectangle(0, 0, 2, 4))
    assert (black.side_a, black.side_b, black.color) == ("bottom", "top", Color.BLACK)
    assert (white.side_a, white.side_b, white.color) == ("left", "right", Color.WHITE)
    with pytest.raises(ValueError):
        lengthwise_quads(square_annulus(1, 2))


def test_disjoint_crossings():
    config, index = lattice(4, 4, lambda i, j: 1 if j in (0, 2) else -1)
    quad = QuadSpec.left_right(rectangle(0, 0, 4, 4))
    assert disjoint_crossing_count(config, index, quad) == 2
    assert disjoint_crossing_count(config, index, quad, limit=1) == 1
    full, full_index = lattice(4, 4, lambda i, j: 1)
    assert disjoint_crossing_count(full, full_index, quad) == 4
    empty, empty_index = lattice(4, 4)
    assert disjoint_crossing_count(empty, empty_index, quad) == 0


def test_duality_on_samples(seed):
    rect = rectangle(0, 0, 8, 4)
    for config, index in seeded_samples(seed, Window.around(rect), 8):
        assert check_duality(config, index, rect)
        tall = rectangle(2, 0, 4, 4)
        assert check_duality(config, index, tall)


def test_witness_is_valid_on_samples(seed):
    rect = rectangle(0, 0, 6, 6)
    quad = QuadSpec.left_right(rect)
    for config, index in seeded_samples(seed, Window.around(rect), 8):
        result = crossing(config, index, quad)
        if result:
            cx = clip_to_region(index, rect)
            assert validate_witness(cx, config.colors, quad, result.witness)
        assert disjoint_crossing_count(config, index, quad, limit=2) >= int(result.holds)


@pytest.mark.slow
def test_raster_oracle_agrees_on_samples(seed):
    rect = rectangle(0, 0, 6, 6)
    quad = QuadSpec.left_right(rect)
    samples = list(seeded_samples(seed.child("raster"), Window.around(rect), 20))
    agree = sum(
        raster_crossing(config, quad, Color.BLACK, 0.02) == crossing(config, index, quad).holds
        for config, index in samples
    )
    assert agree >= len(samples) - 1
