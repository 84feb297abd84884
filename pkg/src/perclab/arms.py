"""
Arm events in square annuli, detected through monochromatic crossing clusters.

A crossing cluster is a connected set of same-colour pieces touching both the inner and the outer
side. Distinct clusters of one colour share no cell piece, so counting colour alternations along
the inner side decides the j-arm events without explicit path bookkeeping.
"""

import math
from dataclasses import dataclass

import numpy as np
import shapely
from pydantic import BaseModel, ConfigDict, Field, PositiveInt
from scipy import ndimage
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from shapely.geometry.base import BaseGeometry

from .connectivity import Color
from .geometry import TessellationIndex, build_index, clip_to_region
from .misc import COORD_TOLERANCE, DEFAULT_RASTER_RESOLUTION
from .project_logger import getMainLogger
from .regions import Region, Sector, square_annulus
from .sampling import Configuration, Environment, resample_points_in

_logger = getMainLogger()


class ArmSpec(BaseModel):
    """
    j-arm event in the square annulus A(r,R) around [center], possibly restricted to a sector.
    The inner radius is at least 1. r >= R is allowed: the event then holds trivially.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    j: PositiveInt
    r: float = Field(ge=1)
    R: float = Field(gt=0)
    center: tuple[float, float] = (0.0, 0.0)
    sector: Sector = Sector.FULL
    wedge: tuple[float, float] | None = Field(
        default=None, description="(start, end) in degrees, only for the custom sector"
    )

    @property
    def degenerate(self) -> bool:
        return self.r >= self.R

    def region(self) -> Region:
        return square_annulus(self.r, self.R, self.center, self.sector, self.wedge)

    def with_radii(self, r: float, R: float) -> "ArmSpec":
        return self.model_validate(self.model_dump() | {"r": r, "R": R})


@dataclass(frozen=True)
class ArmReport:
    holds: bool
    interface_count: int
    clusters: tuple[tuple[int, Color], ...]
    positions: tuple[float, ...]
    alternation_count: int
    cyclic: bool = True

    @property
    def black_clusters(self) -> int:
        return sum(1 for _, c in self.clusters if c == Color.BLACK)


def _changes(colors: list[Color], cyclic: bool) -> int:
    if len(colors) < 2:
        return 0
    pairs = zip(colors, colors[1:] + colors[:1]) if cyclic else zip(colors, colors[1:])
    return sum(1 for a, b in pairs if a != b)


def _decide(spec: ArmSpec, colors: list[Color], alternation: int, cyclic: bool) -> bool:
    """
    Arm rule on the ordered colours of the crossing clusters
    """
    blacks = sum(1 for c in colors if c == Color.BLACK)
    j = spec.j
    if not cyclic:
        # linear order: longest alternating subsequence = number of colour runs
        if j == 1:
            return blacks >= 1
        runs = alternation + 1 if colors else 0
        return runs >= j
    if j % 2 == 0:
        return alternation >= j
    # odd j: a (j-1)-alternating selection plus one more black cluster
    return alternation >= j - 1 and blacks >= (j - 1) // 2 + 1


def _trivial_report() -> ArmReport:
    return ArmReport(
        holds=True, interface_count=0, clusters=(), positions=(), alternation_count=0
    )


def crossing_clusters(
    config: Configuration, index: TessellationIndex, spec: ArmSpec
) -> ArmReport:
    """
    Enumerate monochromatic clusters joining the inner to the outer side, ordered by their
    first attachment on the inner side (cyclically for full annuli, linearly for sectors)
    """
    if spec.degenerate:
        return _trivial_report()
    region = spec.region()
    cx = clip_to_region(index, region)
    labels = cx.color_clusters(config.colors)
    signs = cx.piece_signs(config.colors)

    inner_ids, inner_xy, _ = cx.contacts["inner"]
    outer_ids, _, _ = cx.contacts["outer"]
    crossing = np.intersect1d(labels[inner_ids], labels[outer_ids])
    angles = region.attachment_position(inner_xy) if len(inner_ids) else np.empty(0)

    first: dict[int, float] = {}
    for label, angle in zip(labels[inner_ids].tolist(), angles.tolist()):
        if label in crossing and angle < first.get(label, math.inf):
            first[label] = angle
    ordered = sorted(first, key=lambda label: (first[label], label))
    color_of = {int(labels[i]): Color.BLACK if signs[i] == 1 else Color.WHITE for i in inner_ids}
    colors = [color_of[label] for label in ordered]
    cyclic = region.cyclic
    alternation = _changes(colors, cyclic)

    # interfaces from the contact arcs themselves, one colour change at a time
    member = np.isin(labels[inner_ids], crossing)
    arc_order = np.argsort(angles[member], kind="stable")
    arc_colors = [
        Color.BLACK if s == 1 else Color.WHITE for s in signs[inner_ids[member]][arc_order]
    ]
    interfaces = _changes(arc_colors, cyclic)

    return ArmReport(
        holds=_decide(spec, colors, alternation, cyclic),
        interface_count=interfaces,
        clusters=tuple((int(label), c) for label, c in zip(ordered, colors)),
        positions=tuple(first[label] for label in ordered),
        alternation_count=alternation,
        cyclic=cyclic,
    )


def arm_event(config: Configuration, index: TessellationIndex, spec: ArmSpec) -> bool:
    return crossing_clusters(config, index, spec).holds


def hat_arm_event(
    config: Configuration,
    index: TessellationIndex,
    spec: ArmSpec,
    inner_trials: int,
    stream: np.random.Generator,
) -> bool:
    """
    One-sided Monte Carlo test of the conditional-positivity event: true if the arm event holds
    now or after redrawing the coloured points outside the annulus in one of [inner_trials]
    attempts. False is never a certificate.
    """
    if inner_trials < 0:
        raise ValueError(f"inner_trials must be >= 0, got {inner_trials}")
    if arm_event(config, index, spec):
        return True
    complement = config.env.window.dilated_box.difference(spec.region().polygon)
    for trial in range(inner_trials):
        redrawn = resample_points_in(config, complement, stream)
        if redrawn.env.n_points == 0:
            continue
        if arm_event(redrawn, build_index(redrawn.env), spec):
            _logger.debug(f"Conditional arm event realised after {trial + 1} completion(s)")
            return True
    return False


def dense_event(env: Environment, region: Region | BaseGeometry, delta: float) -> bool:
    """
    True iff every location of [region] is within delta * diam(region) of a point of the
    environment inside [region]. The farthest location is a vertex of the Voronoi cells of those
    points clipped to the region.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0,1), got {delta}")
    polygon = region.polygon if isinstance(region, Region) else region
    if not env.window.dilated_box.buffer(COORD_TOLERANCE).covers(polygon):
        raise ValueError("Dense region must lie within the dilated window")
    inside = env.inside(polygon)
    if not inside.any():
        return False
    diameter = float(pdist(shapely.get_coordinates(polygon.convex_hull)).max())

    sub = Environment(points=env.points[inside], window=env.window, provenance=env.provenance)
    sub_index = build_index(sub)
    pieces = shapely.intersection(sub_index.cells, polygon)
    farthest = 0.0
    for point, piece in zip(sub.points, pieces):
        if piece.is_empty:
            continue
        corners = shapely.get_coordinates(piece)
        farthest = max(farthest, float(np.linalg.norm(corners - point, axis=1).max()))
    return farthest <= delta * diameter


def raster_arm_clusters(
    config: Configuration, spec: ArmSpec, resolution: float = DEFAULT_RASTER_RESOLUTION
) -> ArmReport:
    """
    Raster oracle for crossing_clusters: pixel centres coloured by nearest point, 4-connected
    clusters, inner and outer pixels within one resolution unit of their side
    """
    if resolution <= 0:
        raise ValueError(f"Resolution must be > 0, got {resolution}")
    if spec.degenerate:
        return _trivial_report()
    region = spec.region()
    x0, y0, x1, y1 = region.bounds
    nx, ny = math.ceil((x1 - x0) / resolution), math.ceil((y1 - y0) / resolution)
    gx, gy = np.meshgrid(
        x0 + resolution * (np.arange(nx) + 0.5), y0 + resolution * (np.arange(ny) + 0.5)
    )
    inside = shapely.contains_xy(region.polygon, gx, gy)
    _, nearest = cKDTree(config.env.points).query(np.column_stack([gx.ravel(), gy.ravel()]))
    pixel_color = config.colors[nearest].reshape(gx.shape)
    centres = shapely.points(gx, gy)
    near_inner = inside & shapely.dwithin(region.side("inner"), centres, resolution)
    near_outer = inside & shapely.dwithin(region.side("outer"), centres, resolution)

    found: list[tuple[float, int, Color]] = []
    for color in (Color.BLACK, Color.WHITE):
        labels, _ = ndimage.label(inside & (pixel_color == color.sign))
        crossing = np.intersect1d(labels[near_inner], labels[near_outer])
        for label in crossing[crossing > 0]:
            pix = near_inner & (labels == label)
            angle = region.attachment_position(np.column_stack([gx[pix], gy[pix]])).min()
            found.append((float(angle), int(label) * 2 + (color == Color.WHITE), color))
    found.sort()
    colors = [c for _, _, c in found]
    cyclic = region.cyclic
    alternation = _changes(colors, cyclic)
    return ArmReport(
        holds=_decide(spec, colors, alternation, cyclic),
        interface_count=alternation,
        clusters=tuple((label, c) for _, label, c in found),
        positions=tuple(a for a, _, _ in found),
        alternation_count=alternation,
        cyclic=cyclic,
    )


@dataclass(frozen=True)
class InterfaceEndpoints:
    positions: tuple[float, ...]
    min_separation: float | None


def interface_endpoints(report: ArmReport) -> InterfaceEndpoints:
    """
    Inner-side attachment positions where the cluster colour changes, and their smallest
    pairwise angular separation (None with fewer than two endpoints)
    """
    colors = [c for _, c in report.clusters]
    m = len(colors)
    ends = []
    for k in range(1, m + (1 if report.cyclic else 0)):
        if colors[k % m] != colors[k - 1]:
            ends.append(report.positions[k % m])
    ends.sort()
    if len(ends) < 2:
        return InterfaceEndpoints(tuple(ends), None)
    gaps = np.diff(ends)
    if report.cyclic:
        gaps = np.append(gaps, 2 * math.pi - ends[-1] + ends[0])
    return InterfaceEndpoints(tuple(ends), float(gaps.min()))
