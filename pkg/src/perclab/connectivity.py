"""
Crossing events of quads: exact decision on the clipped complex and a raster oracle.
"""

import math
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import shapely
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, maximum_flow
from scipy.spatial import cKDTree

from .geometry import ClippedComplex, TessellationIndex, clip_to_region
from .project_logger import getMainLogger
from .regions import Region, RegionKind
from .sampling import Configuration

_logger = getMainLogger()


class Color(StrEnum):
    BLACK = "black"
    WHITE = "white"

    @property
    def sign(self) -> int:
        return 1 if self == Color.BLACK else -1

    @property
    def opposite(self) -> "Color":
        return Color.WHITE if self == Color.BLACK else Color.BLACK


@dataclass(frozen=True)
class QuadSpec:
    """
    Region with two distinguished, disjoint sides and the colour of the crossing path
    """

    region: Region
    side_a: str
    side_b: str
    color: Color = Color.BLACK

    def __post_init__(self):
        object.__setattr__(self, "color", Color(self.color))
        if self.side_a == self.side_b:
            raise ValueError(f"Quad sides must differ, got [{self.side_a}] twice")
        a, b = self.region.side(self.side_a), self.region.side(self.side_b)
        if a.intersects(b):
            raise ValueError(f"Quad sides [{self.side_a}] and [{self.side_b}] are not disjoint")

    @classmethod
    def left_right(cls, rect: Region, color: Color = Color.BLACK) -> "QuadSpec":
        return cls(rect, "left", "right", color)

    @classmethod
    def bottom_top(cls, rect: Region, color: Color = Color.BLACK) -> "QuadSpec":
        return cls(rect, "bottom", "top", color)

    def recolored(self, color: Color) -> "QuadSpec":
        return QuadSpec(self.region, self.side_a, self.side_b, color)


@dataclass(frozen=True)
class CrossResult:
    holds: bool
    witness: tuple[int, ...] | None = None

    def __bool__(self) -> bool:
        return self.holds


def _color_mask(cx: ClippedComplex, colors: np.ndarray, color: Color) -> np.ndarray:
    return cx.piece_signs(colors) == color.sign


def crossing(config: Configuration, index: TessellationIndex, quad: QuadSpec) -> CrossResult:
    """
    Decide whether a path of quad.color pieces joins side_a to side_b inside the quad.

    Breadth-first search from a virtual source wired to every side_a piece of the right colour;
    the witness is a shortest piece path.
    """
    cx = clip_to_region(index, quad.region)
    mask = _color_mask(cx, config.colors, quad.color)
    sources = cx.side_pieces(quad.side_a)
    sources = sources[mask[sources]]
    targets = cx.side_pieces(quad.side_b)
    targets = targets[mask[targets]]
    if len(sources) == 0 or len(targets) == 0:
        return CrossResult(False)

    n = cx.n_pieces
    graph = cx.graph(mask).tocoo()
    rows = np.concatenate([graph.row, np.full(len(sources), n), sources])
    cols = np.concatenate([graph.col, sources, np.full(len(sources), n)])
    full = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n + 1, n + 1))
    order, predecessors = breadth_first_order(
        full, n, directed=False, return_predecessors=True
    )
    reached = np.zeros(n + 1, dtype=bool)
    reached[order] = True
    hits = targets[reached[targets]]
    if len(hits) == 0:
        return CrossResult(False)

    # first target in BFS order ends a shortest path
    rank = np.empty(n + 1, dtype=np.int64)
    rank[order] = np.arange(len(order))
    node = int(hits[np.argmin(rank[hits])])
    path = [node]
    while predecessors[node] != n:
        node = int(predecessors[node])
        path.append(node)
    return CrossResult(True, tuple(reversed(path)))


def validate_witness(
    cx: ClippedComplex, colors: np.ndarray, quad: QuadSpec, witness: tuple[int, ...]
) -> bool:
    """
    Re-check a witness independently of the search: colour, adjacency and side contact
    """
    if not witness:
        return False
    signs = cx.piece_signs(colors)
    if any(signs[w] != quad.color.sign for w in witness):
        return False
    edges = {tuple(e) for e in cx.adjacency.tolist()}
    for u, v in zip(witness, witness[1:]):
        if (min(u, v), max(u, v)) not in edges:
            return False
    return quad.side_a in cx.touches(witness[0]) and quad.side_b in cx.touches(witness[-1])


def raster_crossing(
    config: Configuration, quad: QuadSpec, color: Color, resolution: float
) -> bool:
    """
    Brute-force oracle: pixel centres coloured by their nearest point, 4-connected flood fill.
    Side pixels lie within one resolution unit of the side.
    """
    if resolution <= 0:
        raise ValueError(f"Resolution must be > 0, got {resolution}")
    color = Color(color)
    region = quad.region
    x0, y0, x1, y1 = region.bounds
    nx, ny = math.ceil((x1 - x0) / resolution), math.ceil((y1 - y0) / resolution)
    gx, gy = np.meshgrid(
        x0 + resolution * (np.arange(nx) + 0.5), y0 + resolution * (np.arange(ny) + 0.5)
    )
    inside = shapely.contains_xy(region.polygon, gx, gy)
    _, nearest = cKDTree(config.env.points).query(np.column_stack([gx.ravel(), gy.ravel()]))
    pixel_color = config.colors[nearest].reshape(gx.shape)

    near_a = inside & shapely.dwithin(region.side(quad.side_a), shapely.points(gx, gy), resolution)
    near_b = inside & shapely.dwithin(region.side(quad.side_b), shapely.points(gx, gy), resolution)
    if not near_a.any() or not near_b.any():
        raise ValueError(f"Resolution {resolution} leaves a quad side without pixels")

    labels, _ = ndimage.label(inside & (pixel_color == color.sign))
    start = set(np.unique(labels[near_a])) - {0}
    end = set(np.unique(labels[near_b])) - {0}
    return bool(start & end)


def lengthwise_quads(rect: Region) -> tuple[QuadSpec, QuadSpec]:
    """
    (black lengthwise, white widthwise) quads of a rectangle; squares count as wider than tall
    """
    if rect.kind != RegionKind.RECTANGLE:
        raise ValueError(f"Duality needs a rectangle, got {rect.kind}")
    x0, y0, x1, y1 = rect.bounds
    if x1 - x0 >= y1 - y0:
        return QuadSpec.left_right(rect, Color.BLACK), QuadSpec.bottom_top(rect, Color.WHITE)
    return QuadSpec.bottom_top(rect, Color.BLACK), QuadSpec.left_right(rect, Color.WHITE)


def check_duality(config: Configuration, index: TessellationIndex, rect: Region) -> bool:
    """
    True iff exactly one of (black lengthwise crossing, white widthwise crossing) holds
    """
    black, white = lengthwise_quads(rect)
    ok = crossing(config, index, black).holds != crossing(config, index, white).holds
    if not ok:
        _logger.error(f"Self-duality violated on rectangle {rect.bounds}")
    return ok


def disjoint_crossing_count(
    config: Configuration, index: TessellationIndex, quad: QuadSpec, limit: int | None = None
) -> int:
    """
    Largest number of piece-disjoint crossings of quad.color, by unit node-capacity max-flow.
    Pieces of one cell are separate nodes, so the count can exceed the cell-disjoint one only
    when a cell is cut into several pieces by the region.
    """
    cx = clip_to_region(index, quad.region)
    mask = _color_mask(cx, config.colors, quad.color)
    sources = cx.side_pieces(quad.side_a)
    sources = sources[mask[sources]]
    targets = cx.side_pieces(quad.side_b)
    targets = targets[mask[targets]]
    if len(sources) == 0 or len(targets) == 0:
        return 0

    n = cx.n_pieces
    source, sink = 2 * n, 2 * n + 1
    big = n + 1
    colored = np.flatnonzero(mask)
    edges = cx.adjacency
    edges = edges[mask[edges[:, 0]] & mask[edges[:, 1]]] if len(edges) else edges
    rows = [2 * colored, 2 * edges[:, 0] + 1, 2 * edges[:, 1] + 1, np.full(len(sources), source), 2 * targets + 1]
    cols = [2 * colored + 1, 2 * edges[:, 1], 2 * edges[:, 0], 2 * sources, np.full(len(targets), sink)]
    caps = [
        np.ones(len(colored)),
        np.full(len(edges), big),
        np.full(len(edges), big),
        np.ones(len(sources)),
        np.ones(len(targets)),
    ]
    graph = csr_matrix(
        (np.concatenate(caps).astype(np.int32), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * n + 2, 2 * n + 2),
    )
    value = int(maximum_flow(graph, source, sink).flow_value)
    return value if limit is None else min(value, limit)
