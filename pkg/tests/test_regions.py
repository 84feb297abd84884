import math

import numpy as np
import pytest

from perclab.regions import (
    RegionKind,
    Sector,
    centered_rectangle,
    polygon_region,
    rectangle,
    square_annulus,
)


def test_rectangle_sides():
    rect = rectangle(0, 0, 4, 2)
    assert rect.kind == RegionKind.RECTANGLE
    assert rect.bounds == (0.0, 0.0, 4.0, 2.0)
    assert rect.side("left").length == pytest.approx(2)
    assert rect.side("bottom").length == pytest.approx(4)
    assert rect.diameter == pytest.approx(math.hypot(4, 2))


def test_degenerate_rectangle():
    with pytest.raises(ValueError):
        rectangle(0, 0, 0, 2)


def test_unknown_side():
    with pytest.raises(ValueError, match="no side"):
        rectangle(0, 0, 1, 1).side("inner")


def test_centered_rectangle():
    rect = centered_rectangle(4, 2, center=(1, 1))
    assert rect.bounds == (-3.0, -1.0, 5.0, 3.0)


def test_regions_compare_by_key():
    assert rectangle(0, 0, 2, 1) == rectangle(0, 0, 2, 1)
    assert hash(rectangle(0, 0, 2, 1)) == hash(rectangle(0, 0, 2, 1))
    assert rectangle(0, 0, 2, 1) != rectangle(0, 0, 2, 2)


def test_annulus_area_and_sides():
    ann = square_annulus(1, 3)
    assert ann.kind == RegionKind.ANNULUS
    assert ann.area == pytest.approx(36 - 4)
    assert set(ann.sides) == {"inner", "outer"}
    assert ann.side("inner").length == pytest.approx(8)
    assert ann.cyclic


@pytest.mark.parametrize("r, R", [(2, 2), (3, 1), (0, 1)])
def test_annulus_needs_r_below_R(r, R):
    with pytest.raises(ValueError):
        square_annulus(r, R)


@pytest.mark.parametrize("sector, fraction", [(Sector.UPPER_HALF, 0.5), (Sector.QUARTER, 0.25)])
def test_sector_area(sector, fraction):
    region = square_annulus(1, 4, sector=sector)
    assert region.kind == RegionKind.SECTOR
    assert not region.cyclic
    assert region.area == pytest.approx(fraction * (64 - 4))
    assert set(region.sides) == {"inner", "outer", "start", "end"}
    assert region.side("start").length == pytest.approx(3)


def test_custom_sector_needs_wedge():
    with pytest.raises(ValueError):
        square_annulus(1, 4, sector=Sector.CUSTOM)
    with pytest.raises(ValueError):
        square_annulus(1, 4, sector=Sector.CUSTOM, wedge=(90, 45))
    wedge = square_annulus(1, 4, sector=Sector.CUSTOM, wedge=(0, 90))
    assert wedge.area == pytest.approx(square_annulus(1, 4, sector=Sector.QUARTER).area)


def test_attachment_position():
    ann = square_annulus(1, 3)
    pos = ann.attachment_position(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]))
    assert pos == pytest.approx([0, math.pi / 2, math.pi, 3 * math.pi / 2])


def test_attachment_position_from_wedge_start():
    quarter = square_annulus(1, 3, sector=Sector.CUSTOM, wedge=(90, 180))
    assert quarter.attachment_position([[-1.0, 1.0]])[0] == pytest.approx(math.pi / 4)


def test_polygon_region():
    tri = polygon_region([(0, 0), (4, 0), (0, 4)], {"base": [0], "legs": [1, 2]})
    assert tri.kind == RegionKind.POLYGON
    assert tri.area == pytest.approx(8)
    assert tri.side("base").length == pytest.approx(4)
    assert tri.side("legs").length == pytest.approx(4 + 4 * math.sqrt(2))


def test_polygon_region_invalid():
    with pytest.raises(ValueError):
        polygon_region([(0, 0), (1, 1), (2, 2)], {"a": [0]})
    with pytest.raises(ValueError):
        polygon_region([(0, 0), (4, 0), (0, 4)], {"a": [5]})
