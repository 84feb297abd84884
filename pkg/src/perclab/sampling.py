"""
Poisson environments and their colourings inside a padded window.

The environment is the intensity-1 Poisson process restricted to the window dilated by its padding;
geometric queries are only valid inside the undilated window (the region of interest, ROI).
Environments and configurations are immutable: every operation returns a new value.
"""

import math
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

import numpy as np
import shapely
from pydantic import BaseModel, ConfigDict, Field, model_validator
from shapely.geometry.base import BaseGeometry
from typing_extensions import Self

from .misc import COORD_TOLERANCE, MIN_PADDING
from .project_logger import getMainLogger
from .randomness import poisson_count
from .regions import Region


def default_padding(roi_diameter: float) -> float:
    """max(6, 3 log10(ROI diameter)) in intensity-1 length units"""
    return max(MIN_PADDING, 3 * math.log10(max(roi_diameter, 1.0)))


class Window(BaseModel):
    """
    Region of interest [x_min,x_max] x [y_min,y_max], sampled with [padding] on every side
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    padding: float = Field(ge=0, description="Omitted or None means the default padding")

    @model_validator(mode="before")
    @classmethod
    def fill_padding(cls, data):
        if isinstance(data, dict) and data.get("padding") is None:
            try:
                diameter = math.hypot(
                    float(data["x_max"]) - float(data["x_min"]),
                    float(data["y_max"]) - float(data["y_min"]),
                )
            except (KeyError, TypeError, ValueError):
                return data
            data = {**data, "padding": default_padding(diameter)}
        return data

    @model_validator(mode="after")
    def validate_window(self) -> Self:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"Window must have positive area: [{self.x_min},{self.x_max}]x[{self.y_min},{self.y_max}]"
            )
        return self

    @classmethod
    def around(cls, region: Region | BaseGeometry, padding: float | None = None) -> "Window":
        """Window whose ROI is the bounding box of [region]"""
        x0, y0, x1, y1 = _as_geometry(region).bounds
        return cls(
            x_min=x0, x_max=x1, y_min=y0, y_max=y1, padding=padding
        )

    @property
    def roi_diameter(self) -> float:
        return math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)

    @property
    def roi_box(self) -> BaseGeometry:
        return shapely.box(self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def dilated_bounds(self) -> tuple[float, float, float, float]:
        d = self.padding
        return (self.x_min - d, self.y_min - d, self.x_max + d, self.y_max + d)

    @property
    def dilated_box(self) -> BaseGeometry:
        return shapely.box(*self.dilated_bounds)

    @property
    def dilated_area(self) -> float:
        x0, y0, x1, y1 = self.dilated_bounds
        return (x1 - x0) * (y1 - y0)

    @property
    def truncation_bound(self) -> float:
        """
        Upper bound on the probability that some Voronoi cell meeting the ROI has its nucleus
        outside the dilated window. Cover the ROI by squares of side padding/sqrt(2); if each
        holds a point, every ROI location sees a point within distance padding.
        """
        if self.padding == 0:
            return 1.0
        side = self.padding / math.sqrt(2)
        squares = math.ceil((self.x_max - self.x_min) / side) * math.ceil(
            (self.y_max - self.y_min) / side
        )
        return min(1.0, squares * math.exp(-(side**2)))


class Provenance(StrEnum):
    SAMPLED = "sampled"
    EXPLICIT = "explicit"


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Environment:
    """
    Finite point sample (the uncoloured process) in a dilated window
    """

    points: np.ndarray
    window: Window
    provenance: Provenance = Provenance.EXPLICIT
    seed_info: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 2)
        x0, y0, x1, y1 = self.window.dilated_bounds
        tol = COORD_TOLERANCE
        outside = (
            (points[:, 0] < x0 - tol)
            | (points[:, 0] > x1 + tol)
            | (points[:, 1] < y0 - tol)
            | (points[:, 1] > y1 + tol)
        )
        if outside.any():
            raise ValueError(
                f"{int(outside.sum())} point(s) lie outside the dilated window {self.window.dilated_bounds}"
            )
        if len(np.unique(points, axis=0)) != len(points):
            raise ValueError("Environment points must be distinct")
        object.__setattr__(self, "points", _readonly(points))

    @classmethod
    def explicit(cls, points, window: Window) -> "Environment":
        return cls(points=np.asarray(points, dtype=float), window=window)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def inside(self, region: Region | BaseGeometry) -> np.ndarray:
        """Boolean mask of points lying in the closed [region]"""
        return shapely.intersects_xy(_as_geometry(region), self.points[:, 0], self.points[:, 1])


@dataclass(frozen=True, eq=False)
class Configuration:
    """
    Environment plus one colour per point (+1 black, -1 white), drawn at parameter [p].

    [marks] holds the uniform behind every colour (black iff mark < p), which couples
    colourings at different p. Explicit and filled points carry mark 0 (black) or 1 (white).
    """

    env: Environment
    colors: np.ndarray
    p: float
    marks: np.ndarray | None = None

    def __post_init__(self):
        colors = np.array(self.colors, dtype=np.int8).reshape(-1)
        if len(colors) != self.env.n_points:
            raise ValueError(
                f"Got {len(colors)} colours for {self.env.n_points} points"
            )
        if not np.isin(colors, (-1, 1)).all():
            raise ValueError("Colours must be +1 (black) or -1 (white)")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0,1], got {self.p}")
        marks = self.marks
        if marks is None:
            marks = np.where(colors == 1, 0.0, 1.0)
        marks = np.array(marks, dtype=float).reshape(-1)
        if len(marks) != len(colors):
            raise ValueError("One mark per point is required")
        object.__setattr__(self, "colors", _readonly(colors))
        object.__setattr__(self, "marks", _readonly(marks))

    @classmethod
    def explicit(cls, env: Environment, colors, p: float = 0.5) -> "Configuration":
        return cls(env=env, colors=np.asarray(colors), p=p)

    def at_p(self, p: float) -> "Configuration":
        """Same environment and marks, coloured at [p]"""
        return Configuration(
            env=self.env, colors=np.where(self.marks < p, 1, -1), p=p, marks=self.marks
        )

    def with_colors(self, colors) -> "Configuration":
        return Configuration(env=self.env, colors=np.asarray(colors), p=self.p)

    def flipped(self, index: int) -> "Configuration":
        colors = self.colors.copy()
        colors[index] = -colors[index]
        return self.with_colors(colors)


def _as_geometry(region: Region | BaseGeometry) -> BaseGeometry:
    return region.polygon if isinstance(region, Region) else region


def _within_dilated(env: Environment, region: Region | BaseGeometry) -> BaseGeometry:
    geom = _as_geometry(region)
    dilated = env.window.dilated_box
    if not dilated.buffer(COORD_TOLERANCE).covers(geom):
        raise ValueError("Region must lie within the dilated window")
    return geom


def _uniform_in(geom: BaseGeometry, count: int, stream: np.random.Generator) -> np.ndarray:
    """[count] i.i.d. uniform points in [geom], by rejection from its bounding box"""
    if count == 0:
        return np.empty((0, 2))
    x0, y0, x1, y1 = geom.bounds
    accepted = []
    missing = count
    while missing > 0:
        batch = stream.random((2 * missing + 8, 2)) * [x1 - x0, y1 - y0] + [x0, y0]
        keep = batch[shapely.contains_xy(geom, batch[:, 0], batch[:, 1])]
        accepted.append(keep[:missing])
        missing -= len(accepted[-1])
    return np.concatenate(accepted)


def sample_environment(window: Window, stream: np.random.Generator) -> Environment:
    """
    Poisson process of intensity 1 on the dilated window
    """
    x0, y0, x1, y1 = window.dilated_bounds
    count = poisson_count(stream, window.dilated_area)
    points = stream.random((count, 2)) * [x1 - x0, y1 - y0] + [x0, y0]
    return Environment(points=points, window=window, provenance=Provenance.SAMPLED)


def sample_coloring(env: Environment, p: float, stream: np.random.Generator) -> Configuration:
    """
    Independent colouring: every point is black with probability [p]
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0,1], got {p}")
    marks = stream.random(env.n_points)
    return Configuration(env=env, colors=np.where(marks < p, 1, -1), p=p, marks=marks)


def resample_colors_in(
    config: Configuration, region: Region | BaseGeometry, stream: np.random.Generator
) -> Configuration:
    """
    Redraw the colours of the points in [region] at config.p; everything else is kept
    """
    _within_dilated(config.env, region)
    inside = config.env.inside(region)
    marks = config.marks.copy()
    marks[inside] = stream.random(int(inside.sum()))
    colors = np.where(inside, np.where(marks < config.p, 1, -1), config.colors)
    return Configuration(env=config.env, colors=colors, p=config.p, marks=marks)


def resample_points_in(
    config: Configuration, region: Region | BaseGeometry, stream: np.random.Generator
) -> Configuration:
    """
    Redraw the coloured process inside [region]: points there are replaced by a fresh
    Poisson(area) sample with i.i.d. colours at config.p. Points outside keep identity and colour.
    """
    env = config.env
    geom = _within_dilated(env, region)
    keep = ~env.inside(geom)
    count = poisson_count(stream, geom.area)
    fresh = _uniform_in(geom, count, stream)
    fresh_marks = stream.random(count)
    new_env = Environment(
        points=np.concatenate([env.points[keep], fresh]),
        window=env.window,
        provenance=env.provenance,
        seed_info=env.seed_info,
    )
    marks = np.concatenate([config.marks[keep], fresh_marks])
    colors = np.concatenate(
        [config.colors[keep], np.where(fresh_marks < config.p, 1, -1)]
    )
    return Configuration(env=new_env, colors=colors, p=config.p, marks=marks)


def fill_region(
    config: Configuration, region: Region | BaseGeometry, color: int, spacing: float
) -> Configuration:
    """
    Replace the points of [region] by a square lattice of the given colour.

    The lattice is anchored at the lower-left corner of the region's bounding box and keeps
    every node in the closed region, boundary included.
    """
    if spacing <= 0:
        raise ValueError(f"Fill spacing must be > 0, got {spacing}")
    if color not in (-1, 1):
        raise ValueError(f"Fill colour must be +1 or -1, got {color}")
    env = config.env
    geom = _within_dilated(env, region).intersection(env.window.dilated_box)
    x0, y0, x1, y1 = geom.bounds
    diameter = math.hypot(x1 - x0, y1 - y0)
    if spacing > diameter:
        raise ValueError(f"Fill spacing {spacing} exceeds the region diameter {diameter:.6g}")

    nx = math.floor((x1 - x0) / spacing + 1e-9)
    ny = math.floor((y1 - y0) / spacing + 1e-9)
    gx, gy = np.meshgrid(x0 + spacing * np.arange(nx + 1), y0 + spacing * np.arange(ny + 1))
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    grid = grid[shapely.dwithin(geom, shapely.points(grid), COORD_TOLERANCE)]

    keep = ~env.inside(geom)
    new_env = Environment(
        points=np.concatenate([env.points[keep], grid]),
        window=env.window,
        provenance=env.provenance,
        seed_info=env.seed_info,
    )
    colors = np.concatenate([config.colors[keep], np.full(len(grid), color)])
    marks = np.concatenate([config.marks[keep], np.full(len(grid), 0.0 if color == 1 else 1.0)])
    return Configuration(env=new_env, colors=colors, p=config.p, marks=marks)


_COLOR_TOKENS = {"B": 1, "+1": 1, "1": 1, "W": -1, "-1": -1}


def load_point_file(path: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """
    Read `x y [color]` lines (`#` starts a comment; colours B/W or +1/-1).

    Returns the points and the colours, or None when no line carries a colour.
    Colours must be given on every line or on none.
    """
    points, colors = [], []
    with open(path) as file:
        for lineno, raw in enumerate(file, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 'x y [color]', got '{line}'")
            try:
                points.append((float(tokens[0]), float(tokens[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed coordinates '{line}'")
            if len(tokens) == 3:
                token = tokens[2].upper()
                if token not in _COLOR_TOKENS:
                    raise ValueError(f"{path}:{lineno}: unknown colour '{tokens[2]}'")
                colors.append(_COLOR_TOKENS[token])
    if colors and len(colors) != len(points):
        raise ValueError(f"{path}: colours must be given on every line or on none")
    getMainLogger().debug(f"Loaded {len(points)} points from {path}")
    return np.array(points, dtype=float).reshape(-1, 2), (np.array(colors) if colors else None)


def load_environment(path: str | Path, window: Window | None = None) -> Environment:
    """Environment from a point file; default window is the points' bounding box, no padding"""
    points, _ = load_point_file(path)
    if window is None:
        if len(points) == 0:
            raise ValueError(f"{path}: no points")
        (x0, y0), (x1, y1) = points.min(axis=0), points.max(axis=0)
        window = Window(
            x_min=x0, x_max=max(x1, x0 + 1.0), y_min=y0, y_max=max(y1, y0 + 1.0), padding=0.0
        )
    return Environment.explicit(points, window)


def load_configuration(
    path: str | Path, window: Window | None = None, p: float = 0.5
) -> Configuration:
    """Coloured configuration from a point file whose lines all carry a colour"""
    env = load_environment(path, window)
    _, colors = load_point_file(path)
    if colors is None:
        raise ValueError(f"{path}: no colours given")
    return Configuration.explicit(env, colors, p)
