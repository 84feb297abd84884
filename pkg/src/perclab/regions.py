"""
Query regions with named boundary sides.

Rectangles (quads for crossing events), square annuli A(r,R) = B_R minus the interior of B_r,
their half-plane / quarter-plane / wedge sectors, and general polygons.
"""

import math
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import shapely
from scipy.spatial.distance import pdist
from shapely.geometry import LineString, MultiLineString, Polygon
from shapely.geometry.base import BaseGeometry


class RegionKind(StrEnum):
    RECTANGLE = "rectangle"
    ANNULUS = "annulus"
    SECTOR = "sector"
    POLYGON = "polygon"


class Sector(StrEnum):
    """
    Angular restriction of an annulus
    """

    FULL = "full"
    UPPER_HALF = "upper-half"
    QUARTER = "quarter"
    CUSTOM = "custom"

    def wedge(self, custom: tuple[float, float] | None = None) -> tuple[float, float] | None:
        """Wedge as (start, end) angles in radians, None for the full annulus"""
        match self:
            case Sector.FULL:
                return None
            case Sector.UPPER_HALF:
                return (0.0, math.pi)
            case Sector.QUARTER:
                return (0.0, math.pi / 2)
            case Sector.CUSTOM:
                if custom is None:
                    raise ValueError("Custom sector needs a wedge (start, end) in degrees")
                start, end = math.radians(custom[0]), math.radians(custom[1])
                if not 0 < end - start < 2 * math.pi:
                    raise ValueError(f"Invalid wedge {custom}: need 0 < end - start < 360")
                return (start, end)


@dataclass(frozen=True, eq=False)
class Region:
    """
    Closed planar region with named boundary sides.
    Equality and hashing go through [key] so regions can index caches.
    """

    kind: RegionKind
    key: tuple
    polygon: Polygon
    sides: dict[str, BaseGeometry] = field(repr=False)
    center: tuple[float, float] | None = None
    wedge: tuple[float, float] | None = None

    def __eq__(self, other) -> bool:
        return isinstance(other, Region) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def side(self, name: str) -> BaseGeometry:
        try:
            return self.sides[name]
        except KeyError:
            raise ValueError(
                f"Region {self.kind} has no side [{name}] (sides: {sorted(self.sides)})"
            )

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return tuple(self.polygon.bounds)

    @property
    def area(self) -> float:
        return self.polygon.area

    @property
    def diameter(self) -> float:
        hull = shapely.get_coordinates(self.polygon.convex_hull)
        if len(hull) < 2:
            return 0.0
        return float(pdist(hull).max())

    @property
    def cyclic(self) -> bool:
        """True when the attachment order along the inner side is cyclic"""
        return self.kind == RegionKind.ANNULUS

    def attachment_position(self, xy: np.ndarray) -> np.ndarray:
        """
        Position of boundary locations along the inner side: the angle around the centre in
        [0, 2pi), measured from the wedge start for sectors.
        """
        if self.center is None:
            raise ValueError(f"Region {self.kind} has no centre")
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        angle = np.arctan2(xy[:, 1] - self.center[1], xy[:, 0] - self.center[0])
        start = 0.0 if self.wedge is None else self.wedge[0]
        return np.mod(angle - start, 2 * math.pi)


def _edge(a, b) -> LineString:
    return LineString([a, b])


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Region:
    """
    Axis-aligned rectangle [x0,x1] x [y0,y1] with sides left, right, bottom, top
    """
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"Degenerate rectangle [{x0},{x1}]x[{y0},{y1}]")
    sides = {
        "left": _edge((x0, y0), (x0, y1)),
        "right": _edge((x1, y0), (x1, y1)),
        "bottom": _edge((x0, y0), (x1, y0)),
        "top": _edge((x0, y1), (x1, y1)),
    }
    return Region(
        kind=RegionKind.RECTANGLE,
        key=("rectangle", x0, y0, x1, y1),
        polygon=shapely.box(x0, y0, x1, y1),
        sides=sides,
        center=((x0 + x1) / 2, (y0 + y1) / 2),
    )


def centered_rectangle(
    rho1: float, rho2: float, center: tuple[float, float] = (0.0, 0.0)
) -> Region:
    """
    The box [-rho1, rho1] x [-rho2, rho2] of Cross(rho1, rho2), shifted to [center]
    """
    cx, cy = center
    return rectangle(cx - rho1, cy - rho2, cx + rho1, cy + rho2)


def square_annulus(
    r: float,
    R: float,
    center: tuple[float, float] = (0.0, 0.0),
    sector: Sector = Sector.FULL,
    wedge: tuple[float, float] | None = None,
) -> Region:
    """
    Square annulus [-R,R]^2 minus (-r,r)^2 around [center], optionally restricted to a sector.

    Sides: inner, outer, and for sectors the radial cuts start and end.
    [wedge] is only read for Sector.CUSTOM, in degrees counter-clockwise from the x axis.
    """
    if not 0 < r < R:
        raise ValueError(f"Square annulus needs 0 < r < R, got r={r}, R={R}")
    cx, cy = center
    outer = shapely.box(cx - R, cy - R, cx + R, cy + R)
    inner = shapely.box(cx - r, cy - r, cx + r, cy + r)
    full = Polygon(outer.exterior.coords, [inner.exterior.coords])
    inner_side = LineString(inner.exterior.coords)
    outer_side = LineString(outer.exterior.coords)
    angles = Sector(sector).wedge(wedge)

    if angles is None:
        return Region(
            kind=RegionKind.ANNULUS,
            key=("annulus", r, R, cx, cy),
            polygon=full,
            sides={"inner": inner_side, "outer": outer_side},
            center=(cx, cy),
        )

    start, end = angles
    far = 4 * R
    # chords of at most pi/8 stay outside B_R, so the fan is exact on the annulus
    steps = max(2, math.ceil((end - start) / (math.pi / 8)) + 1)
    fan = [
        (cx + far * math.cos(t), cy + far * math.sin(t))
        for t in np.linspace(start, end, steps)
    ]
    wedge_poly = Polygon([(cx, cy), *fan])
    polygon = full.intersection(wedge_poly)
    if polygon.geom_type != "Polygon":
        raise ValueError(f"Sector {sector} of A({r},{R}) is not a single polygon")

    def ray(t: float) -> BaseGeometry:
        return _edge((cx, cy), (cx + far * math.cos(t), cy + far * math.sin(t))).intersection(
            full
        )

    sides = {
        "inner": inner_side.intersection(wedge_poly),
        "outer": outer_side.intersection(wedge_poly),
        "start": ray(start),
        "end": ray(end),
    }
    return Region(
        kind=RegionKind.SECTOR,
        key=("sector", r, R, cx, cy, round(start, 12), round(end, 12)),
        polygon=polygon,
        sides=sides,
        center=(cx, cy),
        wedge=(start, end),
    )


def polygon_region(
    vertices: list[tuple[float, float]], sides: dict[str, list[int]]
) -> Region:
    """
    Simple polygon with named sides. Edge k joins vertices[k] to vertices[k+1] (cyclically);
    each side is a list of whole edges.
    """
    polygon = Polygon(vertices)
    if not polygon.is_valid or polygon.area <= 0:
        raise ValueError("Polygon region must be simple with positive area")
    n = len(vertices)
    named = {}
    for name, edges in sides.items():
        if not edges or any(not 0 <= k < n for k in edges):
            raise ValueError(f"Side [{name}] must list edges in [0, {n})")
        named[name] = shapely.line_merge(
            MultiLineString([[vertices[k], vertices[(k + 1) % n]] for k in edges])
        )
    return Region(
        kind=RegionKind.POLYGON,
        key=("polygon", tuple(map(tuple, vertices)), tuple(sorted((k, tuple(v)) for k, v in sides.items()))),
        polygon=polygon,
        sides=named,
    )
