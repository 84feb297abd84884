"""
Quenched and annealed pivotality, per-square pivotal grids and the crossing exploration
with queried-set tracking.
"""

import io
import csv
import itertools
import math
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import shapely
from scipy.cluster.hierarchy import DisjointSet
from scipy.sparse.csgraph import connected_components
from shapely.geometry.base import BaseGeometry

from .arms import ArmSpec, arm_event
from .connectivity import Color, QuadSpec, crossing
from .geometry import TessellationIndex, build_index, clip_to_region
from .misc import DEFAULT_FILL_SPACING, EXHAUSTIVE_LIMIT
from .output import atomic_write_text
from .project_logger import getMainLogger
from .regions import Region
from .sampling import Configuration, fill_region, resample_colors_in, resample_points_in

_logger = getMainLogger()


@dataclass(frozen=True)
class EventSpec:
    """
    A quad crossing or an arm event. Exactly one of [quad], [arm] is set.
    """

    quad: QuadSpec | None = None
    arm: ArmSpec | None = None

    def __post_init__(self):
        if (self.quad is None) == (self.arm is None):
            raise ValueError("An event is either a quad crossing or an arm event")

    @property
    def monotone(self) -> bool:
        """Crossings and one-arm events are monotone in the colouring"""
        return self.quad is not None or self.arm.j == 1

    @property
    def increasing(self) -> bool:
        """Direction of a monotone event: True when recolouring white to black can only help"""
        return self.arm is not None or self.quad.color == Color.BLACK

    @property
    def region(self) -> Region | None:
        if self.quad is not None:
            return self.quad.region
        return None if self.arm.degenerate else self.arm.region()

    def evaluate(self, config: Configuration, index: TessellationIndex) -> bool:
        if self.quad is not None:
            return crossing(config, index, self.quad).holds
        return arm_event(config, index, self.arm)


def quenched_pivotal_point(
    config: Configuration, index: TessellationIndex, x: int, event: EventSpec
) -> bool:
    """
    True iff flipping the colour of point [x] changes the event
    """
    if not 0 <= x < config.env.n_points:
        raise ValueError(f"Point index {x} out of range")
    return event.evaluate(config, index) != event.evaluate(config.flipped(x), index)


def quenched_pivotal_set(
    config: Configuration,
    index: TessellationIndex,
    D: Region | BaseGeometry,
    event: EventSpec,
    limit: int = EXHAUSTIVE_LIMIT,
) -> bool:
    """
    True iff two recolourings of the points in [D] (everything else fixed) give different event
    values. Monotone events compare the two extreme recolourings; other events are enumerated.
    """
    inside = np.flatnonzero(config.env.inside(D))
    if len(inside) == 0:
        return False
    if event.monotone:
        black, white = config.colors.copy(), config.colors.copy()
        black[inside], white[inside] = 1, -1
        return event.evaluate(config.with_colors(black), index) != event.evaluate(
            config.with_colors(white), index
        )
    if len(inside) > limit:
        raise ValueError(
            f"{len(inside)} points in the region exceed the exhaustive limit {limit}"
        )
    seen = set()
    colors = config.colors.copy()
    for pattern in itertools.product((1, -1), repeat=len(inside)):
        colors[inside] = pattern
        seen.add(event.evaluate(config.with_colors(colors), index))
        if len(seen) == 2:
            return True
    return False


def annealed_pivotal_box(
    config: Configuration,
    D: Region | BaseGeometry,
    event: EventSpec,
    fill_spacing: float = DEFAULT_FILL_SPACING,
) -> bool:
    """
    Extremal-fill test: replace the points of [D] by a dense black lattice, then a dense white
    one; pivotal iff the event differs. Exact for monotone events up to the fill spacing.
    """
    if not event.monotone:
        raise ValueError("The extremal fill test needs a monotone event")
    values = []
    for color in (1, -1):
        filled = fill_region(config, D, color, fill_spacing)
        values.append(event.evaluate(filled, build_index(filled.env)))
    return values[0] != values[1]


def annealed_pivotal_box_mc(
    config: Configuration,
    D: Region | BaseGeometry,
    event: EventSpec,
    trials: int,
    stream: np.random.Generator,
) -> bool:
    """
    True iff both event outcomes occur among [trials] redraws of the coloured points in [D]
    """
    if trials < 2:
        raise ValueError(f"Need at least 2 trials, got {trials}")
    seen = set()
    for _ in range(trials):
        redrawn = resample_points_in(config, D, stream)
        if redrawn.env.n_points == 0:
            continue
        seen.add(event.evaluate(redrawn, build_index(redrawn.env)))
        if len(seen) == 2:
            return True
    return False


class PivMode(StrEnum):
    QUENCHED = "quenched"
    ANNEALED = "annealed"
    BOTH = "both"


@dataclass(frozen=True)
class PivSquare:
    n_points: int
    quenched: bool | None
    annealed: bool | None


@dataclass(frozen=True)
class PivGrid:
    """Pivotality of the squares [2 rho sx - rho, 2 rho sx + rho] x [2 rho sy - rho, 2 rho sy + rho]"""

    rho: float
    squares: dict[tuple[int, int], PivSquare] = field(default_factory=dict)

    def count(self, mode: PivMode) -> int:
        attr = "annealed" if mode == PivMode.ANNEALED else "quenched"
        return sum(1 for s in self.squares.values() if getattr(s, attr))

    def count_single_point(self) -> int:
        """Quenched-pivotal squares holding exactly one point"""
        return sum(1 for s in self.squares.values() if s.quenched and s.n_points == 1)


def _square(rho: float, sx: int, sy: int) -> BaseGeometry:
    cx, cy = 2 * rho * sx, 2 * rho * sy
    return shapely.box(cx - rho, cy - rho, cx + rho, cy + rho)


def pivotal_grid(
    config: Configuration,
    index: TessellationIndex,
    event: EventSpec,
    rho: float,
    mode: PivMode = PivMode.ANNEALED,
    fill_spacing: float = DEFAULT_FILL_SPACING,
    trials: int = 16,
    stream: np.random.Generator | None = None,
) -> PivGrid:
    """
    Pivotality of every grid square meeting the dilated window.

    Squares farther from the event region than the window padding are reported non-pivotal without
    evaluation. Non-monotone events need [stream]: their annealed flag is the Monte Carlo test,
    and their quenched flag falls back to colour redraws above the exhaustive limit.
    """
    if rho < 1:
        raise ValueError(f"Grid half-side rho must be >= 1, got {rho}")
    mode = PivMode(mode)
    if not event.monotone and stream is None:
        raise ValueError("Non-monotone events need a random stream for the grid")
    window = config.env.window
    x0, y0, x1, y1 = window.dilated_bounds
    dilated = window.dilated_box
    target = event.region
    squares: dict[tuple[int, int], PivSquare] = {}
    for sx in range(math.ceil((x0 - rho) / (2 * rho)), math.floor((x1 + rho) / (2 * rho)) + 1):
        for sy in range(math.ceil((y0 - rho) / (2 * rho)), math.floor((y1 + rho) / (2 * rho)) + 1):
            square = _square(rho, sx, sy).intersection(dilated)
            if square.area <= 0:
                continue
            n_points = int(config.env.inside(square).sum())
            far = target is None or square.distance(target.polygon) > window.padding
            quenched = annealed = None
            if mode in (PivMode.QUENCHED, PivMode.BOTH):
                quenched = False if far else _quenched_square(config, index, square, event, trials, stream)
            if mode in (PivMode.ANNEALED, PivMode.BOTH):
                if far:
                    annealed = False
                elif event.monotone:
                    annealed = annealed_pivotal_box(config, square, event, fill_spacing)
                else:
                    annealed = annealed_pivotal_box_mc(config, square, event, trials, stream)
            squares[(sx, sy)] = PivSquare(n_points, quenched, annealed)
    grid = PivGrid(rho=rho, squares=squares)
    _logger.debug(
        f"Pivotal grid rho={rho}: {len(squares)} squares, "
        f"{grid.count(PivMode.QUENCHED)} quenched, {grid.count(PivMode.ANNEALED)} annealed"
    )
    return grid


def _quenched_square(config, index, square, event, trials, stream) -> bool:
    n_inside = int(config.env.inside(square).sum())
    if event.monotone or n_inside <= EXHAUSTIVE_LIMIT:
        return quenched_pivotal_set(config, index, square, event)
    seen = {event.evaluate(config, index)}
    for _ in range(trials):
        seen.add(event.evaluate(resample_colors_in(config, square, stream), index))
        if len(seen) == 2:
            return True
    return False


def write_pivgrid_csv(grid: PivGrid, path: str | Path) -> None:
    """
    Dump as CSV `sx, sy, n_points, quenched, annealed`; flags not evaluated are left empty
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["sx", "sy", "n_points", "quenched", "annealed"])
    for (sx, sy), square in sorted(grid.squares.items()):
        writer.writerow(
            [
                sx,
                sy,
                square.n_points,
                "" if square.quenched is None else int(square.quenched),
                "" if square.annealed is None else int(square.annealed),
            ]
        )
    atomic_write_text(path, buffer.getvalue())


class TrackedColors:
    """
    Read-only view of a colouring that records every point whose colour is read
    """

    def __init__(self, colors: np.ndarray):
        self._colors = colors
        self.queried: set[int] = set()

    def __getitem__(self, point: int) -> int:
        self.queried.add(int(point))
        return int(self._colors[point])


def explore_crossing(
    config: Configuration, index: TessellationIndex, rect: Region
) -> tuple[bool, frozenset[int]]:
    """
    Explore the white cluster of the top side of [rect], revealing colours lazily.

    Q0 holds the cells meeting the top side; each round the cells adjacent to active (white,
    connected to the top) pieces are queried. The rectangle is crossed left to right by black
    iff no white path reaches the bottom.
    """
    cx = clip_to_region(index, rect)
    colors = TrackedColors(config.colors)
    nbrs = cx.neighbor_lists()
    top = cx.side_pieces("top")
    bottom = set(cx.side_pieces("bottom").tolist())

    frontier = [int(p) for p in top]
    for p in frontier:
        colors[cx.owners[p]]
    active: set[int] = set()
    while frontier:
        # batch: reveal everything adjacent to the new active pieces at once
        new_active = [p for p in frontier if p not in active and colors[cx.owners[p]] == -1]
        if not new_active:
            break
        active.update(new_active)
        frontier = sorted({q for p in new_active for q in nbrs[p] if q not in active})
        for q in frontier:
            colors[cx.owners[q]]
    crossed = not (active & bottom)
    return crossed, frozenset(colors.queried)


def count_pivotal_points(
    config: Configuration, index: TessellationIndex, quad: QuadSpec
) -> int:
    """
    Number of points whose colour flip changes the crossing of [quad].

    When the crossing holds only points on the witness can be pivotal; when it fails a point of
    the other colour is pivotal iff joining its pieces to the adjacent quad-colour clusters links
    side_a to side_b.
    """
    result = crossing(config, index, quad)
    cx = clip_to_region(index, quad.region)
    if result.holds:
        candidates = np.unique(cx.owners[list(result.witness)])
        return sum(
            1
            for x in candidates
            if not crossing(config.flipped(int(x)), index, quad).holds
        )

    sign = quad.color.sign
    mask = cx.piece_signs(config.colors) == sign
    _, labels = connected_components(cx.graph(mask), directed=False)
    side_a = np.zeros(cx.n_pieces, dtype=bool)
    side_b = np.zeros(cx.n_pieces, dtype=bool)
    side_a[cx.side_pieces(quad.side_a)] = True
    side_b[cx.side_pieces(quad.side_b)] = True
    cluster_a = {int(labels[p]) for p in np.flatnonzero(side_a & mask)}
    cluster_b = {int(labels[p]) for p in np.flatnonzero(side_b & mask)}
    nbrs = cx.neighbor_lists()

    count = 0
    for x in np.unique(cx.owners[~mask]).tolist():
        pieces = cx.pieces_of(x)
        joined = DisjointSet([("p", p) for p in pieces])
        for p in pieces:
            for q in nbrs[p]:
                if mask[q]:
                    node = ("c", int(labels[q]))
                    joined.add(node)
                    joined.merge(("p", p), node)
        for group in joined.subsets():
            reach_a = any(
                (kind == "p" and side_a[i]) or (kind == "c" and i in cluster_a) for kind, i in group
            )
            reach_b = any(
                (kind == "p" and side_b[i]) or (kind == "c" and i in cluster_b) for kind, i in group
            )
            if reach_a and reach_b:
                count += 1
                break
    return count
