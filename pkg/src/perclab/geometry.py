"""
Voronoi substrate: Delaunay adjacency, Voronoi cells clipped to the dilated window, and
region-clipped piece complexes on which in-region connectivity is decided exactly.

Degenerate inputs (cocircular quadruples) are resolved by an index-ordered lifting perturbation:
the lowest-indexed vertex of a cocircular quadruple gets the diagonal. Orientation and in-circle
signs are decided exactly (rational arithmetic) whenever the floating-point filter is inconclusive.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import shapely
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, QhullError, cKDTree
from shapely.geometry import MultiPoint, Polygon

from .misc import AREA_TOLERANCE, COORD_TOLERANCE, LENGTH_TOLERANCE
from .project_logger import getMainLogger
from .regions import Region
from .sampling import Environment

_logger = getMainLogger()

##########################
### EXACT PREDICATES ###
##########################


def _exact(point) -> tuple[Fraction, Fraction]:
    return Fraction(float(point[0])), Fraction(float(point[1]))


def exact_orient(a, b, c) -> int:
    """Sign of the orientation of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear"""
    (ax, ay), (bx, by), (cx, cy) = _exact(a), _exact(b), _exact(c)
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def exact_incircle(a, b, c, d) -> int:
    """
    Sign of the in-circle determinant: for counter-clockwise (a, b, c), +1 when d lies strictly
    inside their circumcircle, -1 outside, 0 cocircular
    """
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = _exact(a), _exact(b), _exact(c), _exact(d)
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def _incircle_filter(pts: np.ndarray, a, b, c, d) -> tuple[np.ndarray, np.ndarray]:
    """Floating in-circle determinants and their permanents (error scale), vectorised"""
    ad, bd, cd = pts[a] - pts[d], pts[b] - pts[d], pts[c] - pts[d]
    alift = (ad**2).sum(axis=1)
    blift = (bd**2).sum(axis=1)
    clift = (cd**2).sum(axis=1)
    t1 = bd[:, 0] * cd[:, 1] - cd[:, 0] * bd[:, 1]
    t2 = cd[:, 0] * ad[:, 1] - ad[:, 0] * cd[:, 1]
    t3 = ad[:, 0] * bd[:, 1] - bd[:, 0] * ad[:, 1]
    det = alift * t1 + blift * t2 + clift * t3
    perm = (
        alift * (np.abs(bd[:, 0] * cd[:, 1]) + np.abs(cd[:, 0] * bd[:, 1]))
        + blift * (np.abs(cd[:, 0] * ad[:, 1]) + np.abs(ad[:, 0] * cd[:, 1]))
        + clift * (np.abs(ad[:, 0] * bd[:, 1]) + np.abs(bd[:, 0] * ad[:, 1]))
    )
    return det, perm


#####################
### TRIANGULATION ###
#####################


def _counter_clockwise(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Orient triangles counter-clockwise and drop zero-area ones"""
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    area2 = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    tris = tris.copy()
    cw = area2 < 0
    tris[cw] = tris[cw][:, [0, 2, 1]]
    tiny = np.abs(area2) <= 1e-12 * (np.abs(b - a).max(axis=1) + np.abs(c - a).max(axis=1)) ** 2
    if tiny.any():
        exact = np.array([exact_orient(*pts[t]) != 0 for t in tris[tiny]], dtype=bool)
        keep = np.ones(len(tris), dtype=bool)
        keep[np.flatnonzero(tiny)[~exact]] = False
        tris = tris[keep]
    return tris


def _edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def _legalize(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """
    Lawson flips under the index-ordered perturbation.

    Only edges whose floating in-circle test is inconclusive are examined; an edge whose
    quadrilateral is exactly cocircular keeps (or receives) the diagonal touching the lowest
    point index of the quadrilateral.
    """
    # interior edges: (triangle, opposite-vertex slot) pairs shared by two triangles
    owners: dict[tuple[int, int], list[int]] = {}
    for t, (a, b, c) in enumerate(tris.tolist()):
        for u, v in ((a, b), (b, c), (c, a)):
            owners.setdefault(_edge_key(u, v), []).append(t)
    shared = [(k, ts) for k, ts in owners.items() if len(ts) == 2]
    if not shared:
        return tris

    def opposite(t: int, u: int, v: int) -> int:
        return next(w for w in tris_list[t] if w != u and w != v)

    tris_list = tris.tolist()
    keys = np.array([k for k, _ in shared])
    t1 = np.array([ts[0] for _, ts in shared])
    t2 = np.array([ts[1] for _, ts in shared])
    third1 = np.array([opposite(t, u, v) for t, (u, v) in zip(t1, keys.tolist())])
    third2 = np.array([opposite(t, u, v) for t, (u, v) in zip(t2, keys.tolist())])
    # orient (u, v, third1) counter-clockwise before the in-circle test
    u, v = keys[:, 0].copy(), keys[:, 1].copy()
    cross = (pts[v] - pts[u])[:, 0] * (pts[third1] - pts[u])[:, 1] - (pts[v] - pts[u])[
        :, 1
    ] * (pts[third1] - pts[u])[:, 0]
    swap = cross < 0
    u[swap], v[swap] = keys[swap, 1], keys[swap, 0]
    det, perm = _incircle_filter(pts, u, v, third1, third2)
    suspicious = np.abs(det) <= 1e-10 * perm
    if not suspicious.any():
        return tris

    stack = [tuple(k) for k in keys[suspicious].tolist()]
    flips = 0
    while stack:
        key = stack.pop()
        ts = owners.get(key)
        if ts is None or len(ts) != 2:
            continue
        a, b = key
        ta, tb = ts
        c, d = opposite(ta, a, b), opposite(tb, a, b)
        p, q = (a, b) if exact_orient(pts[a], pts[b], pts[c]) > 0 else (b, a)
        sign = exact_incircle(pts[p], pts[q], pts[c], pts[d])
        if sign < 0 or (sign == 0 and min(a, b, c, d) in (a, b)):
            continue
        # flip (a, b) -> (c, d); quad in counter-clockwise order is p, d, q, c
        for t in (ta, tb):
            x, y, z = tris_list[t]
            for e in ((x, y), (y, z), (z, x)):
                owners[_edge_key(*e)].remove(t)
        del owners[key]
        tris_list[ta] = [p, d, c]
        tris_list[tb] = [d, q, c]
        for t in (ta, tb):
            x, y, z = tris_list[t]
            for e in ((x, y), (y, z), (z, x)):
                owners.setdefault(_edge_key(*e), []).append(t)
        stack.extend(_edge_key(*e) for e in ((p, d), (d, q), (q, c), (c, p)))
        flips += 1
    if flips:
        _logger.debug(f"Delaunay tie-break: {flips} flip(s) on cocircular quadrilaterals")
    return np.array(tris_list, dtype=np.int64)


def _circumcenters(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a, b, c = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    b, c = b - a, c - a
    d = 2 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    bl, cl = (b**2).sum(axis=1), (c**2).sum(axis=1)
    ux = (c[:, 1] * bl - b[:, 1] * cl) / d
    uy = (b[:, 0] * cl - c[:, 0] * bl) / d
    return a + np.column_stack([ux, uy])


###############
### INDEXES ###
###############


@dataclass(frozen=True, eq=False)
class ClippedComplex:
    """
    Connected components ("pieces") of cell-region intersections with their adjacency.
    Two pieces are adjacent when they share a boundary arc of positive length in the region.
    """

    region: Region
    pieces: np.ndarray
    owners: np.ndarray
    adjacency: np.ndarray
    contacts: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)
    _by_owner: dict[int, list[int]] = field(default_factory=dict, repr=False)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def pieces_of(self, owner: int) -> list[int]:
        return self._by_owner.get(int(owner), [])

    def side_pieces(self, side: str) -> np.ndarray:
        """Pieces with positive-length contact with [side]"""
        self.region.side(side)
        pieces, _, _ = self.contacts[side]
        return np.unique(pieces)

    def touches(self, piece: int) -> frozenset[str]:
        return frozenset(name for name, (ids, _, _) in self.contacts.items() if piece in ids)

    def graph(self, mask: np.ndarray | None = None) -> csr_matrix:
        """Symmetric piece adjacency; with [mask], only edges joining two masked pieces"""
        edges = self.adjacency
        if mask is not None:
            edges = edges[mask[edges[:, 0]] & mask[edges[:, 1]]]
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        n = self.n_pieces
        return csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))

    def neighbor_lists(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n_pieces)]
        for a, b in self.adjacency.tolist():
            nbrs[a].append(b)
            nbrs[b].append(a)
        return nbrs

    def piece_signs(self, colors: np.ndarray) -> np.ndarray:
        return np.asarray(colors)[self.owners]

    def color_clusters(self, colors: np.ndarray) -> np.ndarray:
        """Label monochromatic clusters: connected components of the same-colour piece graph"""
        signs = self.piece_signs(colors)
        edges = self.adjacency
        same = edges[signs[edges[:, 0]] == signs[edges[:, 1]]]
        n = self.n_pieces
        graph = csr_matrix(
            (np.ones(len(same), dtype=np.int8), (same[:, 0], same[:, 1])), shape=(n, n)
        )
        _, labels = connected_components(graph, directed=False)
        return labels


@dataclass(frozen=True, eq=False)
class TessellationIndex:
    """
    Delaunay adjacency, Voronoi cells clipped to the dilated window, and a nearest-point index
    """

    env: Environment
    delaunay_edges: np.ndarray
    voronoi_edges: np.ndarray
    edge_lengths: np.ndarray
    cells: np.ndarray
    cell_bounds: np.ndarray
    tree: cKDTree = field(repr=False)
    _complexes: dict = field(default_factory=dict, repr=False)

    @property
    def n_points(self) -> int:
        return self.env.n_points

    def neighbors(self, i: int) -> np.ndarray:
        e = self.delaunay_edges
        return np.sort(np.concatenate([e[e[:, 0] == i, 1], e[e[:, 1] == i, 0]]))

    def cells_meeting(self, bounds) -> np.ndarray:
        x0, y0, x1, y1 = bounds
        b = self.cell_bounds
        return np.flatnonzero((b[:, 0] <= x1) & (b[:, 2] >= x0) & (b[:, 1] <= y1) & (b[:, 3] >= y0))


def _halfplane(pi: np.ndarray, pj: np.ndarray, reach: float) -> Polygon:
    """Large quadrilateral covering the side of the bisector of (pi, pj) that holds pi"""
    mid = (pi + pj) / 2
    normal = (pi - pj) / np.linalg.norm(pi - pj)
    tangent = np.array([-normal[1], normal[0]])
    return Polygon(
        [
            mid + tangent * reach,
            mid - tangent * reach,
            mid - tangent * reach + normal * reach,
            mid + tangent * reach + normal * reach,
        ]
    )


def _halfplane_cells(pts: np.ndarray, edges: np.ndarray, box: Polygon, reach: float) -> np.ndarray:
    cells = np.empty(len(pts), dtype=object)
    for i in range(len(pts)):
        cell = box
        nbrs = np.concatenate([edges[edges[:, 0] == i, 1], edges[edges[:, 1] == i, 0]])
        for j in nbrs:
            cell = cell.intersection(_halfplane(pts[i], pts[j], reach))
        cells[i] = cell
    return cells


def _collinear_edges(pts: np.ndarray) -> np.ndarray:
    """Delaunay edges of collinear points: consecutive points along the line"""
    far = np.argmax(((pts - pts[0]) ** 2).sum(axis=1))
    direction = pts[far] - pts[0]
    order = np.argsort((pts - pts[0]) @ direction, kind="stable")
    pairs = np.column_stack([order[:-1], order[1:]])
    return np.sort(pairs, axis=1)


def _all_collinear(pts: np.ndarray) -> bool:
    if len(pts) < 3:
        return True
    far = int(np.argmax(((pts - pts[0]) ** 2).sum(axis=1)))
    return all(exact_orient(pts[0], pts[far], q) == 0 for q in pts)


def build_index(env: Environment) -> TessellationIndex:
    """
    Tessellate [env]: Delaunay edges (exact tie-break), Voronoi cells clipped to the dilated
    window, Voronoi edge segments dual to the Delaunay edges, and a k-d tree for nearest queries
    """
    pts = env.points
    n = len(pts)
    if n == 0:
        raise ValueError("Cannot tessellate an empty environment")
    box = env.window.dilated_box
    x0, y0, x1, y1 = env.window.dilated_bounds
    reach = 4 * (np.hypot(x1 - x0, y1 - y0) + np.abs(pts).max() + 1.0)

    segments: list[tuple[np.ndarray, np.ndarray]] = []
    if _all_collinear(pts):
        edges = _collinear_edges(pts) if n > 1 else np.empty((0, 2), dtype=np.int64)
        for i, j in edges:
            mid = (pts[i] + pts[j]) / 2
            d = pts[j] - pts[i]
            t = np.array([-d[1], d[0]]) / np.linalg.norm(d)
            segments.append((mid - t * reach, mid + t * reach))
        cells = _halfplane_cells(pts, edges, box, reach) if n > 1 else np.array([box], dtype=object)
    else:
        try:
            tri = Delaunay(pts)
        except QhullError as err:
            raise ValueError(f"Delaunay triangulation failed: {err}")
        tris = _legalize(pts, _counter_clockwise(pts, tri.simplices.astype(np.int64)))
        centers = _circumcenters(pts, tris)
        incident: dict[tuple[int, int], list[int]] = {}
        for t, (a, b, c) in enumerate(tris.tolist()):
            for u, v in ((a, b), (b, c), (c, a)):
                incident.setdefault(_edge_key(u, v), []).append(t)
        keys = sorted(incident)
        edges = np.array(keys, dtype=np.int64)
        for key in keys:
            ts = incident[key]
            if len(ts) == 2:
                segments.append((centers[ts[0]], centers[ts[1]]))
            else:
                # hull edge: ray from the circumcentre away from the triangle
                t = ts[0]
                u, v = key
                w = next(z for z in tris[t] if z != u and z != v)
                d = pts[v] - pts[u]
                out = np.array([d[1], -d[0]])
                if np.dot(out, pts[w] - pts[u]) > 0:
                    out = -out
                out = out / np.linalg.norm(out)
                segments.append((centers[t], centers[t] + out * reach))

        cells = None
        try:
            diagram = shapely.voronoi_polygons(MultiPoint(pts), extend_to=box, ordered=True)
            polys = np.array(shapely.get_parts(diagram), dtype=object)
            # cell i must hold point i
            if len(polys) == n and shapely.covers(polys, shapely.points(pts)).all():
                cells = shapely.intersection(polys, box)
        except shapely.errors.GEOSException as err:
            _logger.warning(f"GEOS Voronoi failed ({err}); clipping half-planes instead")
        if cells is None:
            cells = _halfplane_cells(pts, edges, box, reach)

    if segments:
        coords = np.array([[a, b] for a, b in segments])
        lines = shapely.clip_by_rect(shapely.linestrings(coords), x0, y0, x1, y1)
    else:
        lines = np.empty(0, dtype=object)
    lengths = shapely.length(lines) if len(lines) else np.empty(0)
    cells = np.asarray(cells, dtype=object)

    return TessellationIndex(
        env=env,
        delaunay_edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        voronoi_edges=np.asarray(lines, dtype=object),
        edge_lengths=np.asarray(lengths, dtype=float),
        cells=cells,
        cell_bounds=shapely.bounds(cells).reshape(-1, 4),
        tree=cKDTree(pts),
    )


def nearest_point(index: TessellationIndex, location) -> int:
    """
    Index of the point nearest to [location]; ties go to the lowest index
    """
    k = min(index.n_points, 8)
    dist, idx = index.tree.query(np.asarray(location, dtype=float), k=k)
    dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
    ties = idx[dist <= dist[0] + COORD_TOLERANCE]
    return int(ties.min())


def nearest_points(index: TessellationIndex, locations: np.ndarray) -> np.ndarray:
    """Vectorised nearest point (ties resolved arbitrarily; they have measure zero)"""
    _, idx = index.tree.query(np.asarray(locations, dtype=float).reshape(-1, 2))
    return idx


def _flat_parts(geoms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Explode collections twice (collections may nest multi-geometries)"""
    parts, first = shapely.get_parts(geoms, return_index=True)
    parts2, second = shapely.get_parts(parts, return_index=True)
    return parts2, first[second]


def clip_to_region(index: TessellationIndex, region: Region) -> ClippedComplex:
    """
    Clip the tessellation to [region]. Results are cached per region on the index.
    """
    cached = index._complexes.get(region)
    if cached is not None:
        return cached
    if region.area <= AREA_TOLERANCE:
        raise ValueError(f"Degenerate region {region.kind} with zero area")
    if not index.env.window.roi_box.buffer(COORD_TOLERANCE).covers(region.polygon):
        raise ValueError(f"Region {region.kind} {region.bounds} is not inside the ROI")

    cand = index.cells_meeting(region.bounds)
    clipped = shapely.intersection(index.cells[cand], region.polygon)
    parts, which = _flat_parts(clipped)
    keep = (shapely.get_type_id(parts) == 3) & (shapely.area(parts) > AREA_TOLERANCE)
    pieces = parts[keep]
    owners = cand[which[keep]]
    by_owner: dict[int, list[int]] = {}
    for pid, owner in enumerate(owners.tolist()):
        by_owner.setdefault(owner, []).append(pid)

    def piece_at(owner: int, xy: np.ndarray) -> int | None:
        ids = by_owner.get(int(owner))
        if not ids:
            return None
        if len(ids) == 1:
            return ids[0]
        return ids[int(np.argmin(shapely.distance(pieces[ids], shapely.points(xy))))]

    # adjacency through Voronoi edges of positive length inside the region
    present = np.zeros(index.n_points, dtype=bool)
    present[owners] = True
    e = index.delaunay_edges
    sel = np.flatnonzero(
        present[e[:, 0]] & present[e[:, 1]] & (index.edge_lengths > LENGTH_TOLERANCE)
    ) if len(e) else np.empty(0, dtype=np.int64)
    pairs = set()
    if len(sel):
        shared = shapely.intersection(index.voronoi_edges[sel], region.polygon)
        segs, which = _flat_parts(shared)
        ok = (shapely.get_type_id(segs) == 1) & (shapely.length(segs) > LENGTH_TOLERANCE)
        mids = shapely.get_coordinates(
            shapely.line_interpolate_point(segs[ok], 0.5, normalized=True)
        )
        for (i, j), xy in zip(e[sel[which[ok]]].tolist(), mids):
            a, b = piece_at(i, xy), piece_at(j, xy)
            if a is not None and b is not None and a != b:
                pairs.add((min(a, b), max(a, b)))
    adjacency = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    # positive-length contacts with every named side
    contacts = {}
    for name, side in region.sides.items():
        touching = shapely.intersection(index.cells[cand], side)
        segs, which = _flat_parts(touching)
        ok = (shapely.get_type_id(segs) == 1) & (shapely.length(segs) > LENGTH_TOLERANCE)
        mids = shapely.get_coordinates(
            shapely.line_interpolate_point(segs[ok], 0.5, normalized=True)
        ).reshape(-1, 2)
        ids, points, lengths = [], [], []
        for owner, xy, length in zip(cand[which[ok]].tolist(), mids, shapely.length(segs[ok])):
            pid = piece_at(owner, xy)
            if pid is not None:
                ids.append(pid)
                points.append(xy)
                lengths.append(length)
        contacts[name] = (
            np.array(ids, dtype=np.int64),
            np.array(points, dtype=float).reshape(-1, 2),
            np.array(lengths, dtype=float),
        )

    complex_ = ClippedComplex(
        region=region,
        pieces=pieces,
        owners=owners,
        adjacency=adjacency,
        contacts=contacts,
        _by_owner=by_owner,
    )
    index._complexes[region] = complex_
    return complex_


def dump_polygons(source: TessellationIndex | ClippedComplex, path: str | Path) -> None:
    """
    Plain-text polygon list for external plotting: `id owner x1 y1 x2 y2 ...` per polygon,
    interior rings as `hole id x1 y1 ...`
    """
    if isinstance(source, TessellationIndex):
        polys, owners = source.cells, np.arange(source.n_points)
    else:
        polys, owners = source.pieces, source.owners
    with open(path, "w") as file:
        for pid, (poly, owner) in enumerate(zip(polys, owners)):
            if poly is None or poly.is_empty:
                continue
            for part in shapely.get_parts(poly):
                ring = " ".join(f"{x:.12g} {y:.12g}" for x, y in part.exterior.coords)
                file.write(f"{pid} {owner} {ring}\n")
                for hole in part.interiors:
                    coords = " ".join(f"{x:.12g} {y:.12g}" for x, y in hole.coords)
                    file.write(f"hole {pid} {coords}\n")
